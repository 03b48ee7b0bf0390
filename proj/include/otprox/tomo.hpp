#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "otprox/splitting.hpp"

namespace otprox {

enum class ReconMethod { fbp, tv, tv_l2, tv_omt };

ReconMethod parse_method(const std::string& name);
std::string method_name(ReconMethod m);

/// Desk-scale CT experiment configuration. Method parameters left as NaN are
/// filled from the per-method defaults by resolve_defaults.
struct ExperimentConfig {
  int image_size = 64;
  int n_angles = 30;
  double angle_start = M_PI / 4.0;
  double angle_end = 3.0 * M_PI / 4.0;
  int n_lines = 100;
  double detector_extent = 0.0;  // <= 0: circumscribe the image diagonal
  double noise_level = 0.05;
  double kappa_factor = 1.2;
  ReconMethod method = ReconMethod::tv;

  double gamma = std::numeric_limits<double>::quiet_NaN();
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  double tau = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();  // relaxation

  double truncation = 20.0;
  double cost_power = 2.0;
  int inner_iterations = 200;
  double inner_tol = 0.0;  // <= 0: fixed inner iteration count
  int outer_iterations = 2000;
  double fixed_point_tol = 0.0;
  double prior_floor = 1e-6;  // relative to max(prior)
  double fbp_filter = 0.7;
  double warp_amplitude = 0.08;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Fills NaN method parameters with the per-method defaults
/// (tv: tau 0.05, lambda 1; tv_l2: gamma 10, tau 0.05, lambda 1;
///  tv_omt: gamma 4, epsilon 1, tau 5, lambda 1.8).
ExperimentConfig resolve_defaults(ExperimentConfig config);

ParallelGeometry make_geometry(const ExperimentConfig& config);

/// Raw ellipse superposition of the Shepp-Logan phantom on [-1,1]^2
/// (modified contrast values), before clamping or normalization.
double shepp_logan_density(double x, double y);

/// size x size rasterization at pixel centers, clamped to >= 0 and scaled to
/// max 1. Requires size >= 16.
Vec shepp_logan(int size);

/// Smooth sinusoidal coordinate warp of the analytic phantom, rescaled to the
/// phantom's total mass so it can serve as a transport prior.
Vec warped_prior(int size, double amplitude);

struct SimulatedData {
  Vec sinogram;
  double kappa = 0.0;
};

/// b = A(phantom) + e with Gaussian e rescaled so that
/// ||e|| = noise_level * ||A(phantom)||; kappa = kappa_factor * that norm,
/// which keeps the phantom feasible by construction.
SimulatedData simulate_data(const Vec& phantom, const ParallelGeometry& geom,
                            double noise_level, double kappa_factor, std::uint64_t seed);

/// Filtered backprojection: frequency-domain ramp filter windowed by a Hann
/// taper with fractional cutoff filter_param in (0, 1], then the matched
/// backprojection, scaled to approximate the inversion integral.
Vec fbp(const Vec& sinogram, const ParallelGeometry& geom, double filter_param);

struct AssembledProblem {
  SplitProblem problem;
  SplitParams params;
  std::shared_ptr<OmtTransportCost> omt;  // set for tv_omt
  GridSpec grid;
  Vec prior;  // floored prior actually used (empty when not applicable)
  double kappa = 0.0;
};

/// Builds the variational problem for config.method (tv, tv_l2 or tv_omt)
/// around measured data b with noise budget kappa. Prior-based methods
/// require prior (strictly positive after the configured floor).
AssembledProblem assemble_problem(const ExperimentConfig& config, const Vec& b, double kappa,
                                  const std::optional<Vec>& prior);

}  // namespace otprox
