#pragma once

#include <memory>
#include <optional>

#include "otprox/common.hpp"
#include "otprox/transport.hpp"

namespace otprox {

/// max(x, 0) elementwise; independent of sigma.
Vec prox_nonneg(const Vec& x, double sigma);

/// Vector soft-thresholding per pixel of an axis-major d x n field:
/// y_i <- max(1 - sigma/||y_i||, 0) * y_i (zero pixels stay zero).
Vec prox_group_l21(const Vec& field, int d, double sigma);

/// x if ||x|| <= kappa, else kappa * x / ||x||.
Vec project_l2_ball(const Vec& x, double kappa);

/// Prox of gamma * ||. - center||^2 (weight outside, no 1/2):
/// (x + 2 sigma gamma center) / (1 + 2 sigma gamma). Empty center means 0.
Vec prox_squared_l2(const Vec& x, double gamma, const Vec& center, double sigma);

/// A function with an evaluable proximal operator. The conjugate prox is
/// always derived through the Moreau decomposition
/// Prox^sigma_{f*}(x) = x - sigma Prox^{1/sigma}_f(x / sigma),
/// so there is a single correctness path per function.
class ProxFunction {
 public:
  virtual ~ProxFunction() = default;

  virtual Vec prox(const Vec& x, double sigma) = 0;
  virtual Vec prox_conjugate(const Vec& x, double sigma);

  /// Finite penalty part of the function value at x, for iteration logs.
  /// Indicator-type entries report 0 here and expose infeasibility through
  /// constraint_violation.
  virtual double value(const Vec& x) const { return 0.0; }
  virtual double constraint_violation(const Vec& x) const { return 0.0; }
};

/// Free-function form of the Moreau-decomposed conjugate prox.
Vec prox_conjugate(ProxFunction& f, const Vec& x, double sigma);

class NonnegIndicator final : public ProxFunction {
 public:
  Vec prox(const Vec& x, double sigma) override;
  double constraint_violation(const Vec& x) const override;
};

class GroupL21 final : public ProxFunction {
 public:
  explicit GroupL21(int field_dims);
  Vec prox(const Vec& x, double sigma) override;
  double value(const Vec& x) const override;  // ||x||_{2,1}

 private:
  int d_;
};

class L2BallIndicator final : public ProxFunction {
 public:
  explicit L2BallIndicator(double kappa);
  Vec prox(const Vec& x, double sigma) override;
  double constraint_violation(const Vec& x) const override;
  double radius() const { return kappa_; }

 private:
  double kappa_;
};

class SquaredL2 final : public ProxFunction {
 public:
  /// weight * ||x - center||^2; empty center means the origin.
  SquaredL2(double weight, Vec center);
  Vec prox(const Vec& x, double sigma) override;
  double value(const Vec& x) const override;

 private:
  double weight_;
  Vec center_;
};

/// Indicator of the single point {r}.
class PointIndicator final : public ProxFunction {
 public:
  explicit PointIndicator(Vec point);
  Vec prox(const Vec& x, double sigma) override;
  double constraint_violation(const Vec& x) const override;

 private:
  Vec point_;
};

/// gamma * T_eps(prior, .) evaluated through the generalized Sinkhorn
/// iteration; prox at step sigma delegates with sigma_effective =
/// sigma * gamma. Holds the dual potentials between calls for warm starting,
/// so one instance belongs to one solver thread.
class OmtTransportCost final : public ProxFunction {
 public:
  OmtTransportCost(Vec prior, KernelOperator kernel, double gamma,
                   SinkhornOptions inner, bool warm_start = true);

  Vec prox(const Vec& x, double sigma) override;

  const std::optional<DualPotentials>& potentials() const { return potentials_; }
  const SinkhornReport& last_report() const { return last_report_; }
  /// gamma * (trace(C^T M) + eps D(M)) at the most recent prox solution.
  double last_transport_value() const;
  void reset_warm_start() { potentials_.reset(); }

  const KernelOperator& kernel() const { return kernel_; }
  const Vec& prior() const { return prior_; }
  double weight() const { return gamma_; }

 private:
  Vec prior_;
  KernelOperator kernel_;
  double gamma_;
  SinkhornOptions inner_;
  bool warm_start_;
  std::optional<DualPotentials> potentials_;
  SinkhornReport last_report_;
};

}  // namespace otprox
