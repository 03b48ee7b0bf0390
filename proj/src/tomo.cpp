#include "otprox/tomo.hpp"

#include <cmath>

#include "fft_util.hpp"

namespace otprox {

ReconMethod parse_method(const std::string& name) {
  if (name == "fbp") return ReconMethod::fbp;
  if (name == "tv") return ReconMethod::tv;
  if (name == "tv_l2") return ReconMethod::tv_l2;
  if (name == "tv_omt") return ReconMethod::tv_omt;
  throw ConfigError("unknown method '" + name + "' (expected fbp, tv, tv_l2 or tv_omt)");
}

std::string method_name(ReconMethod m) {
  switch (m) {
    case ReconMethod::fbp: return "fbp";
    case ReconMethod::tv: return "tv";
    case ReconMethod::tv_l2: return "tv_l2";
    case ReconMethod::tv_omt: return "tv_omt";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (image_size < 16) throw ConfigError("config: image_size must be >= 16");
  if (n_angles < 1 || n_lines < 1) throw ConfigError("config: need angles and lines");
  if (noise_level < 0.0) throw ConfigError("config: noise_level must be >= 0");
  if (kappa_factor < 1.0) throw ConfigError("config: kappa_factor must be >= 1");
  if (inner_iterations < 1 || outer_iterations < 1)
    throw ConfigError("config: iteration counts must be positive");
  if (!(truncation > 0.0)) throw ConfigError("config: truncation must be positive");
  if (!(fbp_filter > 0.0 && fbp_filter <= 1.0))
    throw ConfigError("config: fbp filter parameter must be in (0, 1]");
  if (prior_floor < 0.0) throw ConfigError("config: prior_floor must be >= 0");
}

ExperimentConfig resolve_defaults(ExperimentConfig c) {
  auto fill = [](double& v, double d) {
    if (std::isnan(v)) v = d;
  };
  switch (c.method) {
    case ReconMethod::fbp:
      break;
    case ReconMethod::tv:
      fill(c.tau, 0.05);
      fill(c.lambda, 1.0);
      break;
    case ReconMethod::tv_l2:
      fill(c.gamma, 10.0);
      fill(c.tau, 0.05);
      fill(c.lambda, 1.0);
      break;
    case ReconMethod::tv_omt:
      fill(c.gamma, 4.0);
      fill(c.epsilon, 1.0);
      fill(c.tau, 5.0);
      fill(c.lambda, 1.8);
      break;
  }
  return c;
}

ParallelGeometry make_geometry(const ExperimentConfig& c) {
  ParallelGeometry geom;
  geom.n_angles = c.n_angles;
  geom.angle_start = c.angle_start;
  geom.angle_end = c.angle_end;
  geom.n_lines = c.n_lines;
  geom.detector_extent = c.detector_extent;
  geom.image_grid = GridSpec{{c.image_size, c.image_size}, {1.0, 1.0}};
  geom.validate();
  return geom;
}

// ---------------------------------------------------------------------------
// Phantoms

namespace {

struct Ellipse {
  double a, b, x0, y0, phi_deg, value;
};

// Shepp-Logan ellipse table with the usual boosted contrast values.
constexpr Ellipse kSheppLogan[] = {
    {0.69, 0.92, 0.0, 0.0, 0.0, 1.0},
    {0.6624, 0.8740, 0.0, -0.0184, 0.0, -0.8},
    {0.11, 0.31, 0.22, 0.0, -18.0, -0.2},
    {0.16, 0.41, -0.22, 0.0, 18.0, -0.2},
    {0.21, 0.25, 0.0, 0.35, 0.0, 0.1},
    {0.046, 0.046, 0.0, 0.1, 0.0, 0.1},
    {0.046, 0.046, 0.0, -0.1, 0.0, 0.1},
    {0.046, 0.023, -0.08, -0.605, 0.0, 0.1},
    {0.023, 0.023, 0.0, -0.606, 0.0, 0.1},
    {0.023, 0.046, 0.06, -0.605, 0.0, 0.1},
};

Vec rasterize(int size, const std::function<double(double, double)>& density) {
  Vec img(static_cast<std::size_t>(size) * size, 0.0);
  const double step = 2.0 / size;
  for (int r = 0; r < size; ++r) {
    const double y = 1.0 - (r + 0.5) * step;
    for (int c = 0; c < size; ++c) {
      const double x = -1.0 + (c + 0.5) * step;
      img[static_cast<std::size_t>(r) * size + c] = density(x, y);
    }
  }
  double mx = 0.0;
  for (double& v : img) {
    v = std::max(v, 0.0);
    mx = std::max(mx, v);
  }
  if (mx > 0.0)
    for (double& v : img) v /= mx;
  return img;
}

}  // namespace

double shepp_logan_density(double x, double y) {
  double v = 0.0;
  for (const auto& e : kSheppLogan) {
    const double phi = e.phi_deg * M_PI / 180.0;
    const double ct = std::cos(phi), st = std::sin(phi);
    const double dx = x - e.x0, dy = y - e.y0;
    const double xr = ct * dx + st * dy;
    const double yr = -st * dx + ct * dy;
    if ((xr / e.a) * (xr / e.a) + (yr / e.b) * (yr / e.b) <= 1.0) v += e.value;
  }
  return v;
}

Vec shepp_logan(int size) {
  if (size < 16) throw ConfigError("shepp_logan: size must be >= 16");
  return rasterize(size, shepp_logan_density);
}

Vec warped_prior(int size, double amplitude) {
  if (size < 16) throw ConfigError("warped_prior: size must be >= 16");
  Vec prior = rasterize(size, [amplitude](double x, double y) {
    const double wx = x + amplitude * std::sin(M_PI * y);
    const double wy = y + amplitude * std::sin(M_PI * x);
    return shepp_logan_density(wx, wy);
  });
  const Vec phantom = shepp_logan(size);
  const double target = sum(phantom);
  const double got = sum(prior);
  if (got > 0.0)
    for (double& v : prior) v *= target / got;
  return prior;
}

SimulatedData simulate_data(const Vec& phantom, const ParallelGeometry& geom, double noise_level,
                            double kappa_factor, std::uint64_t seed) {
  if (noise_level < 0.0) throw ConfigError("simulate_data: noise_level must be >= 0");
  if (kappa_factor < 0.0) throw ConfigError("simulate_data: kappa_factor must be >= 0");
  SimulatedData out;
  out.sinogram = ray_transform(phantom, geom);
  const double data_norm = norm2(out.sinogram);
  out.kappa = kappa_factor * noise_level * data_norm;
  if (noise_level > 0.0) {
    Rng rng(seed);
    Vec e = rng.gaussian_vec(out.sinogram.size());
    const double en = norm2(e);
    if (en > 0.0) {
      const double scale = noise_level * data_norm / en;
      axpy(scale, e, out.sinogram);
    }
  }
  return out;
}

Vec fbp(const Vec& sinogram, const ParallelGeometry& geom, double filter_param) {
  geom.validate();
  if (!(filter_param > 0.0 && filter_param <= 1.0))
    throw ConfigError("fbp: filter parameter must be in (0, 1]");
  if (static_cast<int>(sinogram.size()) != geom.sinogram_size())
    throw DimensionError("fbp: sinogram size mismatch");

  const int n_lines = geom.n_lines;
  const double dt = geom.extent() / n_lines;
  const int padded = detail::next_fast_size(2 * n_lines);
  detail::RealDft dft({padded});
  const int ncplx = dft.complex_count();

  // Ram-Lak ramp |nu| in cycles per detector unit, Hann-tapered with cutoff
  // filter_param * Nyquist.
  std::vector<double> filter(ncplx, 0.0);
  const double nyquist = 0.5 / dt;
  const double cutoff = filter_param * nyquist;
  for (int k = 0; k < ncplx; ++k) {
    const double nu = static_cast<double>(k) / (padded * dt);
    if (nu <= cutoff) filter[k] = nu * (0.5 + 0.5 * std::cos(M_PI * nu / cutoff));
  }

  Vec filtered(sinogram.size(), 0.0);
  parallel_for(geom.n_angles, [&](int a) {
    detail::FftwBuffer<double> real(dft.real_count());
    detail::FftwBuffer<std::complex<double>> spec(ncplx);
    real.zero();
    const double* row = sinogram.data() + static_cast<std::size_t>(a) * n_lines;
    std::copy(row, row + n_lines, real.data());
    dft.forward(real.data(), spec.data());
    for (int k = 0; k < ncplx; ++k) spec.data()[k] *= filter[k];
    dft.inverse(spec.data(), real.data());
    double* out_row = filtered.data() + static_cast<std::size_t>(a) * n_lines;
    for (int l = 0; l < n_lines; ++l) out_row[l] = real.data()[l] / padded;
  });

  Vec img = ray_adjoint(filtered, geom);
  const double dtheta = geom.n_angles > 1
                            ? (geom.angle_end - geom.angle_start) / (geom.n_angles - 1)
                            : M_PI;
  const double h0 = geom.image_grid.spacing[0], h1 = geom.image_grid.spacing[1];
  const double scale = dtheta * dt / (h0 * h1);
  for (double& v : img) v *= scale;
  return img;
}

// ---------------------------------------------------------------------------
// Problem assembly

AssembledProblem assemble_problem(const ExperimentConfig& config_in, const Vec& b, double kappa,
                                  const std::optional<Vec>& prior) {
  ExperimentConfig config = resolve_defaults(config_in);
  config.validate();
  if (kappa < 0.0) throw ConfigError("assemble_problem: kappa must be >= 0");
  if (config.method == ReconMethod::fbp)
    throw ConfigError("assemble_problem: fbp is a direct method; call fbp() instead");

  const ParallelGeometry geom = make_geometry(config);
  if (static_cast<int>(b.size()) != geom.sinogram_size())
    throw DimensionError("assemble_problem: data does not match the geometry");

  AssembledProblem out;
  out.grid = geom.image_grid;
  out.kappa = kappa;
  const int n = out.grid.count();

  const bool needs_prior =
      config.method == ReconMethod::tv_l2 || config.method == ReconMethod::tv_omt;
  if (needs_prior) {
    if (!prior) throw ConfigError("assemble_problem: method " + method_name(config.method) +
                                  " requires a prior image");
    if (static_cast<int>(prior->size()) != n)
      throw DimensionError("assemble_problem: prior does not match the image grid");
    out.prior = *prior;
    if (config.method == ReconMethod::tv_omt) {
      // Dual potentials need a strictly positive first marginal; the floor
      // perturbs the mass by at most prior_floor * max * n.
      double mx = 0.0;
      for (double v : out.prior) mx = std::max(mx, v);
      if (mx <= 0.0) throw ModelError("assemble_problem: prior has no mass");
      const double floor_v = config.prior_floor * mx;
      for (double& v : out.prior) v = std::max(v, floor_v);
    }
  }

  LinearOperator grad = gradient_op(out.grid);
  grad.norm_estimate = power_iteration_norm(grad, 200, config.seed + 101);
  LinearOperator ray = ray_op(geom);
  ray.norm_estimate = power_iteration_norm(ray, 200, config.seed + 102);

  auto ball = std::make_shared<L2BallIndicator>(kappa);
  auto tv_norm = std::make_shared<GroupL21>(2);

  switch (config.method) {
    case ReconMethod::tv: {
      out.problem.f = std::make_shared<NonnegIndicator>();
      out.problem.terms.push_back({tv_norm, grad, Vec(2 * n, 0.0)});
      out.problem.terms.push_back({ball, ray, b});
      break;
    }
    case ReconMethod::tv_l2: {
      out.problem.f = std::make_shared<NonnegIndicator>();
      out.problem.terms.push_back(
          {std::make_shared<SquaredL2>(config.gamma, Vec{}), identity_op(n), out.prior});
      out.problem.terms.push_back({tv_norm, grad, Vec(2 * n, 0.0)});
      out.problem.terms.push_back({ball, ray, b});
      break;
    }
    case ReconMethod::tv_omt: {
      KernelOperator kernel(
          build_cost(out.grid, config.truncation, config.cost_power), config.epsilon);
      SinkhornOptions inner;
      inner.max_iter = config.inner_iterations;
      inner.tol = config.inner_tol > 0.0 ? config.inner_tol : 0.0;
      inner.fixed_iteration_count = config.inner_tol <= 0.0;
      out.omt = std::make_shared<OmtTransportCost>(out.prior, std::move(kernel), config.gamma,
                                                   inner, /*warm_start=*/true);
      out.problem.f = out.omt;
      out.problem.terms.push_back({tv_norm, grad, Vec(2 * n, 0.0)});
      out.problem.terms.push_back({ball, ray, b});
      break;
    }
    case ReconMethod::fbp:
      break;  // unreachable
  }

  out.params.tau = config.tau;
  out.params.relax = config.lambda;
  out.params.max_iter = config.outer_iterations;
  out.params.fixed_point_tol = config.fixed_point_tol;
  out.params.sigmas = default_step_sizes(out.problem.terms, config.tau);
  return out;
}

}  // namespace otprox
