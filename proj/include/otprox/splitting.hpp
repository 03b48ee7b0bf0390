#pragma once

#include <functional>
#include <memory>

#include "otprox/operators.hpp"
#include "otprox/prox.hpp"

namespace otprox {

/// One composite term g_i(L_i z - r_i).
struct SplitTerm {
  std::shared_ptr<ProxFunction> g;
  LinearOperator L;
  Vec r;
};

/// inf_z f(z) + sum_i g_i(L_i z - r_i)
struct SplitProblem {
  std::shared_ptr<ProxFunction> f;
  std::vector<SplitTerm> terms;
};

struct SplitParams {
  double tau = 1.0;
  std::vector<double> sigmas;
  /// Constant relaxation lambda_n in (0, 2); an optional schedule overrides it.
  double relax = 1.0;
  std::function<double(int)> relax_schedule;
  int max_iter = 10000;
  /// Early stop when ||x_{n+1} - x_n|| / max(1, ||x_n||) falls below this;
  /// <= 0 runs the full max_iter.
  double fixed_point_tol = 0.0;
  /// Invoke the observer every k-th iteration (metrics cost extra operator
  /// applications).
  int observe_every = 1;
};

/// Per-iteration metrics passed to the observer.
struct SplitIterationInfo {
  int iteration = 0;
  /// Sum of the finite value() parts of f and the g_i at the current primal
  /// point (indicator terms contribute zero here).
  double objective = 0.0;
  double fixed_point_residual = 0.0;
  /// Largest constraint_violation() over f and the g_i.
  double constraint_residual = 0.0;
  const Vec* x = nullptr;
};

using SplitObserver = std::function<void(const SplitIterationInfo&)>;

struct SplitResult {
  Vec x;
  int iterations = 0;
  bool stopped_by_tolerance = false;
  double final_fixed_point_residual = 0.0;
};

/// sigma_i = 1 / (tau * ||L_i||^2), which makes the step condition value
/// tau * sum_i sigma_i ||L_i||^2 equal to the term count m; valid for m < 4.
/// Operator norms must be present as norm_estimate on every term.
std::vector<double> default_step_sizes(const std::vector<SplitTerm>& terms, double tau);

/// Value of the step condition tau * sum_i sigma_i ||L_i||^2 (must be < 4).
double step_condition_value(const std::vector<SplitTerm>& terms, const SplitParams& params);

/// Douglas-Rachford-type primal-dual iteration over the split problem. The
/// dual proxes are always obtained from the primal proxes by Moreau
/// decomposition. The template parameter selects the v-update: the default
/// relaxes symmetrically, v += lambda (z2 - p2); PrintedVUpdate = true
/// reproduces the asymmetric variant v += lambda (2 z2 - p2) that appears in
/// some descriptions of the scheme and is kept only for comparison - it does
/// not share the symmetric variant's fixed points.
template <bool PrintedVUpdate>
SplitResult douglas_rachford_solve_impl(SplitProblem& problem, const SplitParams& params,
                                        const SplitObserver& observer);

SplitResult douglas_rachford_solve(SplitProblem& problem, const SplitParams& params,
                                   const SplitObserver& observer = {});

extern template SplitResult douglas_rachford_solve_impl<false>(SplitProblem&, const SplitParams&,
                                                               const SplitObserver&);
extern template SplitResult douglas_rachford_solve_impl<true>(SplitProblem&, const SplitParams&,
                                                              const SplitObserver&);

}  // namespace otprox
