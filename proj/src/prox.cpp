#include "otprox/prox.hpp"

#include <cmath>
#include <limits>

namespace otprox {

Vec prox_nonneg(const Vec& x, double /*sigma*/) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::max(x[i], 0.0);
  return y;
}

Vec prox_group_l21(const Vec& field, int d, double sigma) {
  if (d < 1 || field.size() % d != 0)
    throw DimensionError("prox_group_l21: field is not d x n");
  if (!(sigma > 0.0)) throw ConfigError("prox_group_l21: sigma must be positive");
  const std::size_t n = field.size() / d;
  Vec y(field.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double norm_sq = 0.0;
    for (int j = 0; j < d; ++j) {
      const double v = field[j * n + i];
      norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    if (norm > sigma) {
      const double shrink = 1.0 - sigma / norm;
      for (int j = 0; j < d; ++j) y[j * n + i] = shrink * field[j * n + i];
    }
  }
  return y;
}

Vec project_l2_ball(const Vec& x, double kappa) {
  if (kappa < 0.0) throw ConfigError("project_l2_ball: radius must be nonnegative");
  const double n = norm2(x);
  if (n <= kappa) return x;
  return scaled(x, kappa / n);
}

Vec prox_squared_l2(const Vec& x, double gamma, const Vec& center, double sigma) {
  if (gamma < 0.0) throw ConfigError("prox_squared_l2: weight must be nonnegative");
  if (!(sigma > 0.0)) throw ConfigError("prox_squared_l2: sigma must be positive");
  if (!center.empty() && center.size() != x.size())
    throw DimensionError("prox_squared_l2: center size mismatch");
  const double denom = 1.0 + 2.0 * sigma * gamma;
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = center.empty() ? 0.0 : center[i];
    y[i] = (x[i] + 2.0 * sigma * gamma * c) / denom;
  }
  return y;
}

Vec ProxFunction::prox_conjugate(const Vec& x, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("prox_conjugate: sigma must be positive");
  Vec inner = prox(scaled(x, 1.0 / sigma), 1.0 / sigma);
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - sigma * inner[i];
  return y;
}

Vec prox_conjugate(ProxFunction& f, const Vec& x, double sigma) {
  return f.prox_conjugate(x, sigma);
}

Vec NonnegIndicator::prox(const Vec& x, double sigma) { return prox_nonneg(x, sigma); }

double NonnegIndicator::constraint_violation(const Vec& x) const {
  double worst = 0.0;
  for (double v : x) worst = std::max(worst, -v);
  return worst;
}

GroupL21::GroupL21(int field_dims) : d_(field_dims) {
  if (d_ < 1) throw ConfigError("GroupL21: field dimension must be positive");
}

Vec GroupL21::prox(const Vec& x, double sigma) { return prox_group_l21(x, d_, sigma); }

double GroupL21::value(const Vec& x) const {
  if (x.size() % d_ != 0) throw DimensionError("GroupL21::value: field is not d x n");
  const std::size_t n = x.size() / d_;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double norm_sq = 0.0;
    for (int j = 0; j < d_; ++j) {
      const double v = x[j * n + i];
      norm_sq += v * v;
    }
    s += std::sqrt(norm_sq);
  }
  return s;
}

L2BallIndicator::L2BallIndicator(double kappa) : kappa_(kappa) {
  if (kappa_ < 0.0) throw ConfigError("L2BallIndicator: radius must be nonnegative");
}

Vec L2BallIndicator::prox(const Vec& x, double /*sigma*/) { return project_l2_ball(x, kappa_); }

double L2BallIndicator::constraint_violation(const Vec& x) const {
  return std::max(0.0, norm2(x) - kappa_);
}

SquaredL2::SquaredL2(double weight, Vec center) : weight_(weight), center_(std::move(center)) {
  if (weight_ < 0.0) throw ConfigError("SquaredL2: weight must be nonnegative");
}

Vec SquaredL2::prox(const Vec& x, double sigma) {
  return prox_squared_l2(x, weight_, center_, sigma);
}

double SquaredL2::value(const Vec& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - (center_.empty() ? 0.0 : center_[i]);
    s += d * d;
  }
  return weight_ * s;
}

PointIndicator::PointIndicator(Vec point) : point_(std::move(point)) {}

Vec PointIndicator::prox(const Vec& x, double /*sigma*/) {
  if (x.size() != point_.size()) throw DimensionError("PointIndicator: size mismatch");
  return point_;
}

double PointIndicator::constraint_violation(const Vec& x) const {
  if (x.size() != point_.size()) throw DimensionError("PointIndicator: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - point_[i];
    s += d * d;
  }
  return std::sqrt(s);
}

OmtTransportCost::OmtTransportCost(Vec prior, KernelOperator kernel, double gamma,
                                   SinkhornOptions inner, bool warm_start)
    : prior_(std::move(prior)),
      kernel_(std::move(kernel)),
      gamma_(gamma),
      inner_(std::move(inner)),
      warm_start_(warm_start) {
  if (!(gamma_ > 0.0)) throw ConfigError("OmtTransportCost: gamma must be positive");
  if (static_cast<int>(prior_.size()) != kernel_.rows())
    throw DimensionError("OmtTransportCost: prior does not match the kernel");
  for (double m : prior_)
    if (!(m > 0.0)) throw ModelError("OmtTransportCost: prior must be strictly positive");
}

Vec OmtTransportCost::prox(const Vec& x, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("OmtTransportCost: sigma must be positive");
  auto res = omt_prox(prior_, x, sigma * gamma_, kernel_, inner_,
                      warm_start_ ? potentials_ : std::optional<DualPotentials>{});
  potentials_ = std::move(res.potentials);
  last_report_ = res.report;
  return std::move(res.mu_est);
}

double OmtTransportCost::last_transport_value() const {
  if (!potentials_) return std::numeric_limits<double>::quiet_NaN();
  return gamma_ * primal_value(kernel_, *potentials_);
}

}  // namespace otprox
