#include "otprox/operators.hpp"

#include <cmath>
#include <cstdio>

namespace otprox {

Vec gradient_apply(const Vec& u, const GridSpec& grid) {
  grid.validate();
  const int n = grid.count();
  if (static_cast<int>(u.size()) != n) throw DimensionError("gradient_apply: image size mismatch");
  const int d = static_cast<int>(grid.dims.size());
  Vec out(static_cast<std::size_t>(d) * n, 0.0);
  if (d == 1) {
    const double inv_h = 1.0 / grid.spacing[0];
    for (int i = 0; i < n; ++i) {
      const double next = i + 1 < n ? u[i + 1] : 0.0;
      out[i] = (next - u[i]) * inv_h;
    }
    return out;
  }
  const int d0 = grid.dims[0], d1 = grid.dims[1];
  const double inv_h0 = 1.0 / grid.spacing[0], inv_h1 = 1.0 / grid.spacing[1];
  for (int r = 0; r < d0; ++r)
    for (int c = 0; c < d1; ++c) {
      const int i = r * d1 + c;
      const double down = r + 1 < d0 ? u[i + d1] : 0.0;
      const double right = c + 1 < d1 ? u[i + 1] : 0.0;
      out[i] = (down - u[i]) * inv_h0;
      out[n + i] = (right - u[i]) * inv_h1;
    }
  return out;
}

Vec gradient_adjoint(const Vec& p, const GridSpec& grid) {
  grid.validate();
  const int n = grid.count();
  const int d = static_cast<int>(grid.dims.size());
  if (static_cast<int>(p.size()) != static_cast<std::size_t>(d) * n)
    throw DimensionError("gradient_adjoint: field size mismatch");
  Vec out(n, 0.0);
  if (d == 1) {
    const double inv_h = 1.0 / grid.spacing[0];
    for (int i = 0; i < n; ++i) {
      const double prev = i > 0 ? p[i - 1] : 0.0;
      out[i] = (prev - p[i]) * inv_h;
    }
    return out;
  }
  const int d0 = grid.dims[0], d1 = grid.dims[1];
  const double inv_h0 = 1.0 / grid.spacing[0], inv_h1 = 1.0 / grid.spacing[1];
  for (int r = 0; r < d0; ++r)
    for (int c = 0; c < d1; ++c) {
      const int i = r * d1 + c;
      const double up = r > 0 ? p[i - d1] : 0.0;
      const double left = c > 0 ? p[n + i - 1] : 0.0;
      out[i] = (up - p[i]) * inv_h0 + (left - p[n + i]) * inv_h1;
    }
  return out;
}

LinearOperator gradient_op(const GridSpec& grid) {
  grid.validate();
  LinearOperator op;
  op.domain_shape = grid.dims;
  op.range_shape = grid.dims;
  op.range_shape.insert(op.range_shape.begin(), static_cast<int>(grid.dims.size()));
  op.apply = [grid](const Vec& u) { return gradient_apply(u, grid); };
  op.adjoint = [grid](const Vec& p) { return gradient_adjoint(p, grid); };
  return op;
}

LinearOperator identity_op(int n) {
  if (n < 1) throw ConfigError("identity_op: size must be positive");
  LinearOperator op;
  op.domain_shape = {n};
  op.range_shape = {n};
  op.apply = [n](const Vec& v) {
    if (static_cast<int>(v.size()) != n) throw DimensionError("identity: size mismatch");
    return v;
  };
  op.adjoint = op.apply;
  op.norm_estimate = 1.0;
  return op;
}

LinearOperator dense_matrix_op(int rows, int cols, Vec values) {
  if (rows < 1 || cols < 1 || values.size() != static_cast<std::size_t>(rows) * cols)
    throw ConfigError("dense_matrix_op: shape mismatch");
  auto m = std::make_shared<Vec>(std::move(values));
  LinearOperator op;
  op.domain_shape = {cols};
  op.range_shape = {rows};
  op.apply = [m, rows, cols](const Vec& v) {
    if (static_cast<int>(v.size()) != cols) throw DimensionError("dense op: size mismatch");
    Vec y(rows, 0.0);
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols; ++j) s += (*m)[static_cast<std::size_t>(i) * cols + j] * v[j];
      y[i] = s;
    }
    return y;
  };
  op.adjoint = [m, rows, cols](const Vec& v) {
    if (static_cast<int>(v.size()) != rows) throw DimensionError("dense op: size mismatch");
    Vec y(cols, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) y[j] += (*m)[static_cast<std::size_t>(i) * cols + j] * v[i];
    return y;
  };
  return op;
}

// ---------------------------------------------------------------------------
// Parallel-beam ray transform

void ParallelGeometry::validate() const {
  image_grid.validate();
  if (image_grid.dims.size() != 2)
    throw ConfigError("ParallelGeometry: 2-D image grid required");
  if (n_angles < 1 || n_lines < 1)
    throw ConfigError("ParallelGeometry: need at least one angle and one line");
  if (!(angle_end >= angle_start)) throw ConfigError("ParallelGeometry: invalid angle range");
}

std::vector<double> ParallelGeometry::angles() const {
  std::vector<double> out(n_angles);
  if (n_angles == 1) {
    out[0] = 0.5 * (angle_start + angle_end);
  } else {
    const double step = (angle_end - angle_start) / (n_angles - 1);
    for (int a = 0; a < n_angles; ++a) out[a] = angle_start + a * step;
  }
  return out;
}

double ParallelGeometry::extent() const {
  if (detector_extent > 0.0) return detector_extent;
  const double w = image_grid.dims[1] * image_grid.spacing[1];
  const double h = image_grid.dims[0] * image_grid.spacing[0];
  return std::hypot(w, h);
}

std::vector<double> ParallelGeometry::line_offsets() const {
  const double e = extent();
  std::vector<double> out(n_lines);
  for (int l = 0; l < n_lines; ++l) out[l] = -0.5 * e + (l + 0.5) * e / n_lines;
  return out;
}

namespace {

struct RaySampler {
  const ParallelGeometry& geom;
  std::vector<double> angle_table;
  std::vector<double> offsets;
  int d0, d1;
  double h0, h1;
  double radius;   // sampling chord half-length: image circumradius
  double step;     // half the pixel width
  int n_samples;

  explicit RaySampler(const ParallelGeometry& g)
      : geom(g), angle_table(g.angles()), offsets(g.line_offsets()) {
    d0 = g.image_grid.dims[0];
    d1 = g.image_grid.dims[1];
    h0 = g.image_grid.spacing[0];
    h1 = g.image_grid.spacing[1];
    radius = 0.5 * std::hypot(d0 * h0, d1 * h1);
    step = 0.5 * std::min(h0, h1);
    n_samples = static_cast<int>(std::ceil(2.0 * radius / step));
  }

  // Visits every (line, pixel, weight) pair of one angle. Forward and adjoint
  // both go through here so the pair stays exactly matched.
  template <typename F>
  void scan(int angle_idx, F&& visit) const {
    const double theta = angle_table[angle_idx];
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cx = 0.5 * (d1 - 1), cy = 0.5 * (d0 - 1);
    for (int l = 0; l < geom.n_lines; ++l) {
      const double t = offsets[l];
      const double bx = t * ct, by = t * st;
      for (int k = 0; k < n_samples; ++k) {
        const double s = -radius + (k + 0.5) * step;
        const double x = bx - s * st;
        const double y = by + s * ct;
        const double px = x / h1 + cx;
        const double py = cy - y / h0;
        const int c0 = static_cast<int>(std::floor(px));
        const int r0 = static_cast<int>(std::floor(py));
        const double wx = px - c0, wy = py - r0;
        const double w[4] = {(1 - wy) * (1 - wx), (1 - wy) * wx, wy * (1 - wx), wy * wx};
        const int rr[4] = {r0, r0, r0 + 1, r0 + 1};
        const int cc[4] = {c0, c0 + 1, c0, c0 + 1};
        for (int q = 0; q < 4; ++q) {
          if (rr[q] < 0 || rr[q] >= d0 || cc[q] < 0 || cc[q] >= d1) continue;
          visit(l, rr[q] * d1 + cc[q], w[q]);
        }
      }
    }
  }
};

}  // namespace

Vec ray_transform(const Vec& u, const ParallelGeometry& geom) {
  geom.validate();
  if (static_cast<int>(u.size()) != geom.image_grid.count())
    throw DimensionError("ray_transform: image size mismatch");
  const RaySampler sampler(geom);
  Vec sino(geom.sinogram_size(), 0.0);
  parallel_for(geom.n_angles, [&](int a) {
    double* row = sino.data() + static_cast<std::size_t>(a) * geom.n_lines;
    sampler.scan(a, [&](int l, int pixel, double w) { row[l] += w * u[pixel]; });
    for (int l = 0; l < geom.n_lines; ++l) row[l] *= sampler.step;
  });
  return sino;
}

Vec ray_adjoint(const Vec& sino, const ParallelGeometry& geom) {
  geom.validate();
  if (static_cast<int>(sino.size()) != geom.sinogram_size())
    throw DimensionError("ray_adjoint: sinogram size mismatch");
  const RaySampler sampler(geom);
  const int n = geom.image_grid.count();

  // Fixed block partition (independent of the worker count) so the reduction
  // order, and therefore the result, never changes with OTPROX_THREADS.
  const int blocks = std::min(geom.n_angles, 16);
  std::vector<Vec> partial(blocks, Vec(n, 0.0));
  const int per_block = (geom.n_angles + blocks - 1) / blocks;
  parallel_for(blocks, [&](int blk) {
    Vec& img = partial[blk];
    const int lo = blk * per_block;
    const int hi = std::min(geom.n_angles, lo + per_block);
    for (int a = lo; a < hi; ++a) {
      const double* row = sino.data() + static_cast<std::size_t>(a) * geom.n_lines;
      sampler.scan(a, [&](int l, int pixel, double w) { img[pixel] += w * row[l]; });
    }
  });
  Vec out(n, 0.0);
  for (int blk = 0; blk < blocks; ++blk)
    for (int i = 0; i < n; ++i) out[i] += partial[blk][i];
  for (double& v : out) v *= sampler.step;
  return out;
}

LinearOperator ray_op(const ParallelGeometry& geom) {
  geom.validate();
  LinearOperator op;
  op.domain_shape = geom.image_grid.dims;
  op.range_shape = {geom.n_angles, geom.n_lines};
  op.apply = [geom](const Vec& u) { return ray_transform(u, geom); };
  op.adjoint = [geom](const Vec& s) { return ray_adjoint(s, geom); };
  return op;
}

double power_iteration_norm(const LinearOperator& op, int iters, std::uint64_t seed) {
  if (iters < 1) throw ConfigError("power_iteration_norm: iters must be >= 1");
  const int n = op.domain_size();
  Rng rng(seed);
  Vec x = rng.uniform_vec(n, -1.0, 1.0);
  double nx = norm2(x);
  if (nx == 0.0) x.assign(n, 1.0 / std::sqrt(static_cast<double>(n)));
  else for (double& v : x) v /= nx;

  for (int it = 0; it < iters; ++it) {
    Vec y = op.apply(x);
    Vec z = op.adjoint(y);
    const double nz = norm2(z);
    if (nz == 0.0) {
      std::fprintf(stderr, "power_iteration_norm: operator annihilated the iterate; returning 0\n");
      return 0.0;
    }
    for (double& v : z) v /= nz;
    x = std::move(z);
  }
  return norm2(op.apply(x));
}

}  // namespace otprox
