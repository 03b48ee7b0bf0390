#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <variant>

#include "otprox/common.hpp"

namespace otprox {

/// Regular rectangular grid (1-D or 2-D), row-major layout.
struct GridSpec {
  std::vector<int> dims;
  std::vector<double> spacing;

  int count() const {
    int n = 1;
    for (int d : dims) n *= d;
    return n;
  }
  void validate() const;
};

/// Explicit n0 x n1 cost matrix, row-major.
struct DenseCost {
  int n0 = 0;
  int n1 = 0;
  Vec values;
};

/// Cost between grid points i, j equal to min(dist(i,j), truncation)^power.
/// Depends on the coordinate difference only, which is what the FFT kernel
/// path exploits.
struct TranslationInvariantCost {
  GridSpec grid;
  double ground_metric_power = 2.0;
  double truncation = 0.0;
};

using CostSpec = std::variant<DenseCost, TranslationInvariantCost>;

/// Validated constructor for the truncated powered Euclidean cost.
TranslationInvariantCost build_cost(GridSpec grid, double truncation,
                                    double ground_metric_power = 2.0);

/// Materializes any CostSpec as a dense matrix (test oracles, small problems).
DenseCost dense_cost_matrix(const CostSpec& spec);

/// Dimensions of a cost specification (rows, cols).
std::pair<int, int> cost_shape(const CostSpec& spec);

/// The scaling kernel K = exp(-C/epsilon) together with the second kernel
/// C .* K used for evaluating trace(C^T M) without materializing the plan.
///
/// Dense costs are applied as stored matrices. Translation-invariant costs
/// are applied by zero-embedding into a padded grid (size >= 2*dim - 1 per
/// axis, rounded up to an FFT-friendly length) and multiplying in Fourier
/// space, so one product costs O(n log n).
///
/// Immutable after construction; copies share the cached representation and
/// may be applied concurrently from multiple threads.
class KernelOperator {
 public:
  KernelOperator(CostSpec cost, double epsilon);

  int rows() const;
  int cols() const;
  double epsilon() const;
  const CostSpec& cost() const;
  bool translation_invariant() const;

  /// K v (or K^T v). FFT round-off may produce tiny negative entries; values
  /// above -1e-12 * ||Kv||_inf are clamped to zero (counted), anything worse
  /// throws NumericalError.
  Vec apply(const Vec& v, bool transpose = false) const;

  /// (C .* K) v (or transposed).
  Vec apply_cost_kernel(const Vec& v, bool transpose = false) const;

  /// Number of FFT round-off clamps since construction.
  long clamp_events() const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// Log-domain dual variables; the scalings are u_k = exp(lambda_k / epsilon).
/// Entries of lambda1 may be -inf exactly where a point-mass marginal is zero
/// (the corresponding scaling is 0).
struct DualPotentials {
  Vec lambda0;
  Vec lambda1;
};

struct SinkhornReport {
  int iterations = 0;
  double marginal_residual_row = 0.0;
  /// l1 column-marginal residual (point-mass data term) or the relative
  /// lambda0-equation KKT residual (quadratic data term).
  double marginal_residual_col_or_kkt = 0.0;
  double primal_value = 0.0;
  double dual_value = 0.0;
  bool converged = false;
};

/// Data term g in min T_eps(mu0, mu) + g(mu).
struct PointMassTerm {
  Vec mu1;  // g = indicator of {mu1}
};
struct QuadraticTerm {
  Vec mu1;  // g = 1/(2 sigma) * ||mu - mu1||^2
  double sigma = 1.0;
};
using DataTerm = std::variant<PointMassTerm, QuadraticTerm>;

/// g*(-lambda1), the conjugate term of the dual objective.
double g_conjugate_neg(const DataTerm& term, const Vec& lambda1);

struct SinkhornOptions {
  /// Point-mass: both l1 marginal residuals must fall below tol * sum(mu0).
  /// Quadratic: the relative KKT residual of the lambda0 equation must fall
  /// below tol. tol <= 0 disables the residual stop.
  double tol = 1e-8;
  int max_iter = 10000;
  /// Run exactly max_iter sweeps regardless of tol (the residual is still
  /// reported).
  bool fixed_iteration_count = false;
  /// Called after each half-update; half is 0 for the lambda0 step and 1 for
  /// the lambda1 step.
  std::function<void(int iter, int half, const DualPotentials&)> half_step_observer;
  /// Called once per sweep with the convergence-governing scalar residual.
  std::function<void(int iter, double residual)> residual_observer;
};

/// Block-coordinate ascent on the dual of min T_eps(mu0, .) + g: alternates
/// the exact lambda0 maximizer with the term-specific lambda1 maximizer.
/// With a point-mass term the sweeps are exactly the classical Sinkhorn
/// update; with a quadratic term they are the Wright-omega update.
std::pair<DualPotentials, SinkhornReport> generalized_sinkhorn(
    const Vec& mu0, const KernelOperator& K, const DataTerm& term,
    const SinkhornOptions& opts, const std::optional<DualPotentials>& warm = {});

/// Classical balanced Sinkhorn iteration between mu0 > 0 and mu1 >= 0 of
/// equal total mass (relative tolerance 1e-12). Zero entries of mu1 pin the
/// corresponding scaling to zero.
std::pair<DualPotentials, SinkhornReport> sinkhorn(
    const Vec& mu0, const Vec& mu1, const KernelOperator& K, double tol,
    int max_iter, const std::optional<DualPotentials>& warm = {});

struct OmtProxResult {
  Vec mu_est;
  DualPotentials potentials;
  SinkhornReport report;
};

/// Proximal operator of T_eps(mu0, .) with step sigma, evaluated at mu1
/// (entries of arbitrary sign). Returns the minimizer
/// mu_est = exp(lambda1/eps) .* (K^T exp(lambda0/eps)) along with the dual
/// potentials for warm starting.
/// The prox of gamma * T_eps(mu0, .) with step tau is obtained by passing
/// sigma = tau * gamma.
OmtProxResult omt_prox(const Vec& mu0, const Vec& mu1, double sigma,
                       const KernelOperator& K, const SinkhornOptions& inner,
                       const std::optional<DualPotentials>& warm = {});

/// trace(C^T M) + eps * D(M) for the implicit plan M = diag(u0) K diag(u1),
/// with D the normalized entropy sum(m log m - m + 1). Evaluated through the
/// C .* K kernel and the dual algebra; the plan is never materialized.
double primal_value(const KernelOperator& K, const DualPotentials& potentials);

/// The concave dual objective
/// lambda0^T mu0 - g*(-lambda1) - eps u0^T K u1 + eps n0 n1.
double dual_objective(const Vec& mu0, const DataTerm& term,
                      const KernelOperator& K, const DualPotentials& potentials);

/// Entropic proximal of eps^{-1} g at z > 0 for the quadratic
/// g = 1/(2 sigma)||. - mu1||^2: the closed form sigma*eps *
/// omega(mu1/(sigma eps) + log z - log(sigma eps)).
Vec kl_prox_quadratic(const Vec& z, const Vec& mu1, double sigma, double epsilon);

struct ScalingPair {
  Vec u0;
  Vec u1;
};

/// The entropic-proximal formulation of the same coordinate ascent: u-space
/// sweeps u0 = mu0 ./ (K u1), u1 = klprox(K^T u0) ./ (K^T u0) starting from
/// u1 = 1. Exposed so the sweep-by-sweep equivalence with the Wright-omega
/// iteration can be checked.
std::vector<ScalingPair> algorithm3_iterate(const Vec& mu0,
                                            const KernelOperator& K,
                                            const QuadraticTerm& term,
                                            int iters);

enum class PlanDirection { forward, transpose };

/// Image of v under the implicit plan: forward computes M^T v (v lives on the
/// rows, length n0), transpose computes M v. Used with region indicators to
/// render mass-flow maps.
Vec apply_plan(const KernelOperator& K, const DualPotentials& potentials,
               const Vec& v, PlanDirection direction);

/// Column marginal M^T 1 of the implicit plan (the prox output point).
Vec plan_second_marginal(const KernelOperator& K, const DualPotentials& potentials);

/// Exact unregularized transport value for problems of size at most 3x3 by
/// enumeration of the spanning-tree bases of the transportation polytope.
/// Test oracle; throws ConfigError for larger sizes.
double exact_transport_lp(const Vec& mu0, const Vec& mu1, const DenseCost& cost);

}  // namespace otprox
