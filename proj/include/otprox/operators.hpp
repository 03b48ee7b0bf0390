#pragma once

#include <functional>
#include <optional>

#include "otprox/common.hpp"
#include "otprox/transport.hpp"

namespace otprox {

/// A matched apply/adjoint pair with shape metadata. The adjoint is the exact
/// algebraic transpose of apply, so <L u, p> == <u, L^T p> up to round-off.
struct LinearOperator {
  std::vector<int> domain_shape;
  std::vector<int> range_shape;
  std::function<Vec(const Vec&)> apply;
  std::function<Vec(const Vec&)> adjoint;
  std::optional<double> norm_estimate;

  int domain_size() const {
    int n = 1;
    for (int d : domain_shape) n *= d;
    return n;
  }
  int range_size() const {
    int n = 1;
    for (int d : range_shape) n *= d;
    return n;
  }
};

/// Forward difference per axis with zero padding: (grad u)_{j,i} =
/// u_{i+e_j} - u_i with out-of-grid neighbors equal to 0, scaled by the grid
/// spacing. Output layout is axis-major: d blocks of n values.
Vec gradient_apply(const Vec& u, const GridSpec& grid);

/// Exact transpose of gradient_apply (negative divergence with the matching
/// boundary convention).
Vec gradient_adjoint(const Vec& p, const GridSpec& grid);

LinearOperator gradient_op(const GridSpec& grid);

/// Identity on n-vectors.
LinearOperator identity_op(int n);

/// Wraps a row-major dense matrix as an operator (tests, small problems).
LinearOperator dense_matrix_op(int rows, int cols, Vec values);

/// Equidistant parallel-beam geometry. Angles span [angle_start, angle_end]
/// inclusive; detector bins are cell midpoints across detector_extent,
/// centered on the rotation axis. detector_extent <= 0 selects the image
/// diagonal so the object is never truncated.
struct ParallelGeometry {
  int n_angles = 0;
  double angle_start = 0.0;
  double angle_end = 0.0;
  int n_lines = 0;
  double detector_extent = 0.0;
  GridSpec image_grid;

  void validate() const;
  std::vector<double> angles() const;
  std::vector<double> line_offsets() const;
  double extent() const;  // resolved detector extent
  int sinogram_size() const { return n_angles * n_lines; }
};

/// Line integrals of the bilinear interpolant of u, sampled at half the
/// pixel width and scaled by the step length. Sinogram layout is row-major
/// (angle, line). Deterministic; per-angle work runs in parallel.
Vec ray_transform(const Vec& u, const ParallelGeometry& geom);

/// Exact transpose of ray_transform (same interpolation weights, scattered).
Vec ray_adjoint(const Vec& sino, const ParallelGeometry& geom);

LinearOperator ray_op(const ParallelGeometry& geom);

/// Operator-norm estimate by power iteration on L^T L from a seeded random
/// start. Returns 0 for the zero operator. The estimate approaches the true
/// norm from below as iters grows.
double power_iteration_norm(const LinearOperator& op, int iters, std::uint64_t seed);

}  // namespace otprox
