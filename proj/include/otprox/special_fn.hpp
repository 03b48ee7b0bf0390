#pragma once

#include "otprox/common.hpp"

namespace otprox {

/// Numerical controls for the Wright omega evaluation.
struct OmegaEvalPolicy {
  double abs_tol = 1e-14;
  int max_newton_iters = 50;
};

/// Wright omega: the unique w > 0 with w + log(w) = x, for finite real x.
///
/// Newton iteration on g(w) = w + log(w) - x with update
/// w <- w - g(w) * w / (w + 1), started from w0 = exp(x) for x < 1 and
/// w0 = x otherwise, so neither start overflows. For x below the smallest
/// representable logarithm the result equals exp(x) in floating point
/// (possibly 0 by underflow).
///
/// Throws DomainError for non-finite x, NumericalError if Newton fails to
/// reach |g| <= policy.abs_tol * max(1, |x|) within the iteration budget.
double wright_omega(double x, const OmegaEvalPolicy& policy = {});

/// Elementwise wright_omega; errors carry the offending index.
Vec wright_omega_elementwise(const Vec& xs, const OmegaEvalPolicy& policy = {});

}  // namespace otprox
