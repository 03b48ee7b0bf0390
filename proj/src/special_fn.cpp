#include "otprox/special_fn.hpp"

#include <cmath>

namespace otprox {

namespace {
// Below this x, log(omega(x)) is not representable and omega(x) == exp(x)
// to full double precision anyway (the residual w contributes ~exp(x)^2).
constexpr double kUnderflowCut = -745.0;
}  // namespace

double wright_omega(double x, const OmegaEvalPolicy& policy) {
  if (!std::isfinite(x)) throw DomainError("wright_omega: input must be finite");
  if (policy.abs_tol <= 0 || policy.max_newton_iters < 1)
    throw ConfigError("wright_omega: invalid evaluation policy");

  if (x < kUnderflowCut) return std::exp(x);

  double w = x < 1.0 ? std::exp(x) : x;
  const double tol = policy.abs_tol * std::max(1.0, std::abs(x));
  for (int it = 0; it < policy.max_newton_iters; ++it) {
    const double g = w + std::log(w) - x;
    if (std::abs(g) <= tol) return w;
    // Newton step for g; the factor w/(w+1) keeps the iterate positive.
    w -= g * w / (w + 1.0);
  }
  const double g = w + std::log(w) - x;
  if (std::abs(g) <= tol) return w;
  throw NumericalError("wright_omega: Newton did not converge for x=" + std::to_string(x) +
                       ", last iterate " + std::to_string(w));
}

Vec wright_omega_elementwise(const Vec& xs, const OmegaEvalPolicy& policy) {
  Vec out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    try {
      out[i] = wright_omega(xs[i], policy);
    } catch (const DomainError& e) {
      throw DomainError(std::string(e.what()) + " (index " + std::to_string(i) + ")");
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (index " + std::to_string(i) + ")");
    }
  }
  return out;
}

}  // namespace otprox
