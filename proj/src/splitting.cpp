#include "otprox/splitting.hpp"

#include <cmath>
#include <limits>

namespace otprox {

std::vector<double> default_step_sizes(const std::vector<SplitTerm>& terms, double tau) {
  if (!(tau > 0.0)) throw ConfigError("default_step_sizes: tau must be positive");
  if (terms.size() >= 4)
    throw ConfigError(
        "default_step_sizes: sigma_i = 1/(tau ||L_i||^2) makes the step condition value equal "
        "the term count, which must stay below 4; pass step sizes manually");
  std::vector<double> sigmas;
  sigmas.reserve(terms.size());
  for (const auto& t : terms) {
    if (!t.L.norm_estimate)
      throw ConfigError("default_step_sizes: operator norm estimate missing");
    const double norm = *t.L.norm_estimate;
    if (!(norm > 0.0)) throw ConfigError("default_step_sizes: operator norm must be positive");
    sigmas.push_back(1.0 / (tau * norm * norm));
  }
  return sigmas;
}

double step_condition_value(const std::vector<SplitTerm>& terms, const SplitParams& params) {
  if (params.sigmas.size() != terms.size())
    throw ConfigError("step_condition_value: one sigma per term required");
  double s = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (!terms[i].L.norm_estimate)
      throw ConfigError("step_condition_value: operator norm estimate missing");
    const double norm = *terms[i].L.norm_estimate;
    s += params.sigmas[i] * norm * norm;
  }
  return params.tau * s;
}

namespace {

void validate(const SplitProblem& problem, const SplitParams& params) {
  if (!problem.f) throw ConfigError("douglas_rachford_solve: f prox missing");
  if (problem.terms.empty()) throw ConfigError("douglas_rachford_solve: no terms");
  if (!(params.tau > 0.0)) throw ConfigError("douglas_rachford_solve: tau must be positive");
  if (params.max_iter < 1) throw ConfigError("douglas_rachford_solve: max_iter must be >= 1");
  if (params.sigmas.size() != problem.terms.size())
    throw ConfigError("douglas_rachford_solve: one sigma per term required");
  for (double s : params.sigmas)
    if (!(s > 0.0)) throw ConfigError("douglas_rachford_solve: sigmas must be positive");
  if (!params.relax_schedule && !(params.relax > 0.0 && params.relax < 2.0))
    throw ConfigError("douglas_rachford_solve: relaxation must lie in (0, 2)");

  const int n = problem.terms.front().L.domain_size();
  for (const auto& t : problem.terms) {
    if (!t.g) throw ConfigError("douglas_rachford_solve: term prox missing");
    if (t.L.domain_size() != n)
      throw DimensionError("douglas_rachford_solve: operator domains disagree");
    if (static_cast<int>(t.r.size()) != t.L.range_size())
      throw DimensionError("douglas_rachford_solve: shift r does not match operator range");
  }
  const double cond = step_condition_value(problem.terms, params);
  if (!(cond < 4.0))
    throw ConfigError("douglas_rachford_solve: step condition tau * sum sigma_i ||L_i||^2 = " +
                      std::to_string(cond) + " must be < 4");
}

void check_finite(const Vec& v, int iter, const char* what) {
  for (double t : v)
    if (!std::isfinite(t))
      throw NumericalError(std::string("douglas_rachford_solve: non-finite ") + what +
                           " at iteration " + std::to_string(iter));
}

}  // namespace

template <bool PrintedVUpdate>
SplitResult douglas_rachford_solve_impl(SplitProblem& problem, const SplitParams& params,
                                        const SplitObserver& observer) {
  validate(problem, params);
  const int m = static_cast<int>(problem.terms.size());
  const int n = problem.terms.front().L.domain_size();
  const double tau = params.tau;

  Vec x(n, 0.0);
  std::vector<Vec> v(m);
  for (int i = 0; i < m; ++i) v[i].assign(problem.terms[i].r.size(), 0.0);

  SplitResult result;
  double residual = std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= params.max_iter; ++iter) {
    const double relax = params.relax_schedule ? params.relax_schedule(iter) : params.relax;

    // p1 = Prox^tau_f(x - tau/2 * sum_i L_i^* v_i)
    Vec back(n, 0.0);
    for (int i = 0; i < m; ++i) axpy(1.0, problem.terms[i].L.adjoint(v[i]), back);
    Vec arg = x;
    axpy(-0.5 * tau, back, arg);
    Vec p1 = problem.f->prox(arg, tau);
    check_finite(p1, iter, "f-prox output");

    // w1 = 2 p1 - x
    Vec w1(n);
    for (int j = 0; j < n; ++j) w1[j] = 2.0 * p1[j] - x[j];

    std::vector<Vec> p2(m), w2(m);
    for (int i = 0; i < m; ++i) {
      const auto& term = problem.terms[i];
      const double sigma = params.sigmas[i];
      Vec lw = term.L.apply(w1);
      Vec targ(v[i].size());
      for (std::size_t j = 0; j < targ.size(); ++j)
        targ[j] = v[i][j] + 0.5 * sigma * lw[j] - sigma * term.r[j];
      p2[i] = term.g->prox_conjugate(targ, sigma);
      check_finite(p2[i], iter, "conjugate prox output");
      w2[i].resize(p2[i].size());
      for (std::size_t j = 0; j < p2[i].size(); ++j) w2[i][j] = 2.0 * p2[i][j] - v[i][j];
    }

    // z1 = w1 - tau/2 * sum_i L_i^* w2_i
    Vec back2(n, 0.0);
    for (int i = 0; i < m; ++i) axpy(1.0, problem.terms[i].L.adjoint(w2[i]), back2);
    Vec z1 = w1;
    axpy(-0.5 * tau, back2, z1);

    // x update and fixed-point residual
    double diff_sq = 0.0, xnorm_sq = 0.0;
    for (int j = 0; j < n; ++j) {
      const double step = relax * (z1[j] - p1[j]);
      diff_sq += step * step;
      xnorm_sq += x[j] * x[j];
      x[j] += step;
    }
    check_finite(x, iter, "primal iterate");
    residual = std::sqrt(diff_sq) / std::max(1.0, std::sqrt(xnorm_sq));

    // z2_i = w2_i + sigma_i/2 * L_i (2 z1 - w1); v update
    Vec dir(n);
    for (int j = 0; j < n; ++j) dir[j] = 2.0 * z1[j] - w1[j];
    for (int i = 0; i < m; ++i) {
      const double sigma = params.sigmas[i];
      Vec ld = problem.terms[i].L.apply(dir);
      for (std::size_t j = 0; j < v[i].size(); ++j) {
        const double z2 = w2[i][j] + 0.5 * sigma * ld[j];
        if constexpr (PrintedVUpdate)
          v[i][j] += relax * (2.0 * z2 - p2[i][j]);
        else
          v[i][j] += relax * (z2 - p2[i][j]);
      }
      check_finite(v[i], iter, "dual iterate");
    }

    result.iterations = iter;
    const int stride = std::max(1, params.observe_every);
    if (observer && (iter % stride == 0 || iter == 1 || iter == params.max_iter)) {
      SplitIterationInfo info;
      info.iteration = iter;
      info.fixed_point_residual = residual;
      double obj = problem.f->value(p1);
      double viol = problem.f->constraint_violation(p1);
      for (int i = 0; i < m; ++i) {
        const auto& term = problem.terms[i];
        Vec lx = term.L.apply(p1);
        for (std::size_t j = 0; j < lx.size(); ++j) lx[j] -= term.r[j];
        obj += term.g->value(lx);
        viol = std::max(viol, term.g->constraint_violation(lx));
      }
      info.objective = obj;
      info.constraint_residual = viol;
      info.x = &p1;
      observer(info);
    }

    if (params.fixed_point_tol > 0.0 && residual <= params.fixed_point_tol) {
      result.stopped_by_tolerance = true;
      break;
    }
  }

  // The scheme's output point is a final f-prox of the running average.
  Vec back(n, 0.0);
  for (int i = 0; i < m; ++i) axpy(1.0, problem.terms[i].L.adjoint(v[i]), back);
  Vec arg = x;
  axpy(-0.5 * tau, back, arg);
  result.x = problem.f->prox(arg, tau);
  result.final_fixed_point_residual = residual;
  return result;
}

template SplitResult douglas_rachford_solve_impl<false>(SplitProblem&, const SplitParams&,
                                                        const SplitObserver&);
template SplitResult douglas_rachford_solve_impl<true>(SplitProblem&, const SplitParams&,
                                                       const SplitObserver&);

SplitResult douglas_rachford_solve(SplitProblem& problem, const SplitParams& params,
                                   const SplitObserver& observer) {
  return douglas_rachford_solve_impl<false>(problem, params, observer);
}

}  // namespace otprox
