#include "otprox/transport.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>

#include "fft_util.hpp"
#include "otprox/special_fn.hpp"

namespace otprox {

namespace {

constexpr double kMassMatchRelTol = 1e-12;
constexpr double kClampRelThreshold = 1e-12;

double truncated_power_cost(double dist, double truncation, double power) {
  const double d = std::min(dist, truncation);
  return power == 2.0 ? d * d : std::pow(d, power);
}

Vec exp_scaled(const Vec& lambda, double eps, const char* who) {
  Vec u(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    u[i] = std::exp(lambda[i] / eps);
    if (!std::isfinite(u[i]))
      throw NumericalError(std::string(who) +
                           ": scaling exp(lambda/epsilon) overflowed; consider a larger epsilon");
  }
  return u;
}

}  // namespace

void GridSpec::validate() const {
  if (dims.empty() || dims.size() > 2)
    throw ConfigError("GridSpec: 1 or 2 dimensions supported");
  if (spacing.size() != dims.size())
    throw ConfigError("GridSpec: spacing must match dims");
  for (int d : dims)
    if (d < 1) throw ConfigError("GridSpec: dims must be positive");
  for (double h : spacing)
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("GridSpec: spacing must be positive");
}

TranslationInvariantCost build_cost(GridSpec grid, double truncation,
                                    double ground_metric_power) {
  grid.validate();
  if (!(truncation > 0.0) || !std::isfinite(truncation))
    throw ConfigError("build_cost: truncation must be positive");
  if (!(ground_metric_power > 0.0))
    throw ConfigError("build_cost: ground metric power must be positive");
  return TranslationInvariantCost{std::move(grid), ground_metric_power, truncation};
}

std::pair<int, int> cost_shape(const CostSpec& spec) {
  if (const auto* d = std::get_if<DenseCost>(&spec)) return {d->n0, d->n1};
  const auto& ti = std::get<TranslationInvariantCost>(spec);
  const int n = ti.grid.count();
  return {n, n};
}

DenseCost dense_cost_matrix(const CostSpec& spec) {
  if (const auto* d = std::get_if<DenseCost>(&spec)) return *d;
  const auto& ti = std::get<TranslationInvariantCost>(spec);
  ti.grid.validate();
  const auto& dims = ti.grid.dims;
  const auto& h = ti.grid.spacing;
  const int n = ti.grid.count();
  DenseCost out{n, n, Vec(static_cast<std::size_t>(n) * n)};
  const int d1 = dims.size() == 2 ? dims[1] : 1;
  const double h0 = h[0];
  const double h1 = dims.size() == 2 ? h[1] : 1.0;
  for (int i = 0; i < n; ++i) {
    const int ri = i / d1, ci = i % d1;
    for (int j = 0; j < n; ++j) {
      const int rj = j / d1, cj = j % d1;
      const double dy = (ri - rj) * h0;
      const double dx = (ci - cj) * h1;
      out.values[static_cast<std::size_t>(i) * n + j] =
          truncated_power_cost(std::hypot(dy, dx), ti.truncation, ti.ground_metric_power);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// KernelOperator

struct KernelOperator::Impl {
  CostSpec cost;
  double eps;
  int n0, n1;
  bool ti;

  // dense representation
  Vec k_dense, ck_dense;

  // translation-invariant representation
  std::vector<int> padded;
  std::unique_ptr<detail::RealDft> dft;
  std::vector<std::complex<double>> khat, ckhat;

  mutable std::atomic<long> clamp_count{0};
};

KernelOperator::KernelOperator(CostSpec cost, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ConfigError("KernelOperator: epsilon must be positive");
  auto impl = std::make_shared<Impl>();
  impl->eps = epsilon;
  std::tie(impl->n0, impl->n1) = cost_shape(cost);
  impl->ti = std::holds_alternative<TranslationInvariantCost>(cost);
  impl->cost = std::move(cost);

  if (!impl->ti) {
    const auto& d = std::get<DenseCost>(impl->cost);
    if (d.n0 < 1 || d.n1 < 1 || d.values.size() != static_cast<std::size_t>(d.n0) * d.n1)
      throw ConfigError("KernelOperator: dense cost shape mismatch");
    impl->k_dense.resize(d.values.size());
    impl->ck_dense.resize(d.values.size());
    for (std::size_t i = 0; i < d.values.size(); ++i) {
      const double c = d.values[i];
      if (!(c >= 0.0) || !std::isfinite(c))
        throw ConfigError("KernelOperator: cost entries must be finite and nonnegative");
      impl->k_dense[i] = std::exp(-c / epsilon);
      impl->ck_dense[i] = c * impl->k_dense[i];
    }
  } else {
    const auto& ti = std::get<TranslationInvariantCost>(impl->cost);
    ti.grid.validate();
    if (!(ti.truncation > 0.0))
      throw ConfigError("KernelOperator: truncation must be positive");
    const auto& dims = ti.grid.dims;
    impl->padded.resize(dims.size());
    for (std::size_t a = 0; a < dims.size(); ++a)
      impl->padded[a] = detail::next_fast_size(2 * dims[a] - 1);
    impl->dft = std::make_unique<detail::RealDft>(impl->padded);

    const int nreal = impl->dft->real_count();
    const int ncplx = impl->dft->complex_count();
    detail::FftwBuffer<double> stencil(nreal);
    detail::FftwBuffer<std::complex<double>> spec(ncplx);

    const int d0 = dims[0];
    const int d1 = dims.size() == 2 ? dims[1] : 1;
    const int p0 = impl->padded[0];
    const int p1 = dims.size() == 2 ? impl->padded[1] : 1;
    const double h0 = ti.grid.spacing[0];
    const double h1 = dims.size() == 2 ? ti.grid.spacing[1] : 1.0;
    const int row_len = dims.size() == 2 ? p1 : p0;

    auto fill_and_transform = [&](bool with_cost, std::vector<std::complex<double>>& out) {
      stencil.zero();
      for (int di = -(d0 - 1); di <= d0 - 1; ++di) {
        const int wi = (di % p0 + p0) % p0;
        for (int dj = -(d1 - 1); dj <= d1 - 1; ++dj) {
          const int wj = (dj % p1 + p1) % p1;
          const double c = truncated_power_cost(std::hypot(di * h0, dj * h1), ti.truncation,
                                                ti.ground_metric_power);
          const double k = std::exp(-c / epsilon);
          const int idx = dims.size() == 2 ? wi * row_len + wj : wi;
          stencil.data()[idx] = with_cost ? c * k : k;
        }
      }
      impl->dft->forward(stencil.data(), spec.data());
      out.assign(spec.data(), spec.data() + ncplx);
    };
    fill_and_transform(false, impl->khat);
    fill_and_transform(true, impl->ckhat);
  }
  impl_ = std::move(impl);
}

int KernelOperator::rows() const { return impl_->n0; }
int KernelOperator::cols() const { return impl_->n1; }
double KernelOperator::epsilon() const { return impl_->eps; }
const CostSpec& KernelOperator::cost() const { return impl_->cost; }
bool KernelOperator::translation_invariant() const { return impl_->ti; }
long KernelOperator::clamp_events() const { return impl_->clamp_count.load(); }

namespace {

Vec dense_matvec(const Vec& m, int n0, int n1, const Vec& v, bool transpose) {
  Vec y(transpose ? n1 : n0, 0.0);
  if (!transpose) {
    for (int i = 0; i < n0; ++i) {
      const double* row = m.data() + static_cast<std::size_t>(i) * n1;
      double s = 0.0;
      for (int j = 0; j < n1; ++j) s += row[j] * v[j];
      y[i] = s;
    }
  } else {
    for (int i = 0; i < n0; ++i) {
      const double* row = m.data() + static_cast<std::size_t>(i) * n1;
      const double vi = v[i];
      for (int j = 0; j < n1; ++j) y[j] += row[j] * vi;
    }
  }
  return y;
}

}  // namespace

Vec KernelOperator::apply(const Vec& v, bool transpose) const {
  const Impl& im = *impl_;
  const int expect = transpose ? im.n0 : im.n1;
  if (static_cast<int>(v.size()) != expect)
    throw DimensionError("KernelOperator::apply: vector length " + std::to_string(v.size()) +
                         ", expected " + std::to_string(expect));
  if (!im.ti) return dense_matvec(im.k_dense, im.n0, im.n1, v, transpose);

  // The stencil is even in every axis (it depends on |difference| only), so
  // K is symmetric and the transpose product uses the same spectrum.
  const auto& ti = std::get<TranslationInvariantCost>(im.cost);
  const auto& dims = ti.grid.dims;
  const int d0 = dims[0];
  const int d1 = dims.size() == 2 ? dims[1] : 1;
  const int p1 = dims.size() == 2 ? im.padded[1] : 1;
  const int nreal = im.dft->real_count();
  const int ncplx = im.dft->complex_count();

  detail::FftwBuffer<double> real(nreal);
  detail::FftwBuffer<std::complex<double>> spec(ncplx);
  real.zero();
  if (dims.size() == 2) {
    for (int r = 0; r < d0; ++r)
      std::copy(v.begin() + static_cast<std::size_t>(r) * d1,
                v.begin() + static_cast<std::size_t>(r + 1) * d1, real.data() + r * p1);
  } else {
    std::copy(v.begin(), v.end(), real.data());
  }
  im.dft->forward(real.data(), spec.data());
  const auto& hat = im.khat;
  for (int k = 0; k < ncplx; ++k) spec.data()[k] *= hat[k];
  im.dft->inverse(spec.data(), real.data());

  const double scale = 1.0 / nreal;
  Vec y(im.n1);
  if (dims.size() == 2) {
    for (int r = 0; r < d0; ++r)
      for (int c = 0; c < d1; ++c) y[static_cast<std::size_t>(r) * d1 + c] = real.data()[r * p1 + c] * scale;
  } else {
    for (int i = 0; i < d0; ++i) y[i] = real.data()[i] * scale;
  }

  double maxabs = 0.0;
  for (double t : y) maxabs = std::max(maxabs, std::abs(t));
  const double floor_v = -kClampRelThreshold * maxabs;
  for (double& t : y) {
    if (t < 0.0) {
      if (t < floor_v)
        throw NumericalError("KernelOperator::apply: FFT product produced a negative value " +
                             std::to_string(t) + " beyond round-off tolerance");
      t = 0.0;
      im.clamp_count.fetch_add(1, std::memory_order_relaxed);
    }
  }
  return y;
}

Vec KernelOperator::apply_cost_kernel(const Vec& v, bool transpose) const {
  const Impl& im = *impl_;
  const int expect = transpose ? im.n0 : im.n1;
  if (static_cast<int>(v.size()) != expect)
    throw DimensionError("KernelOperator::apply_cost_kernel: shape mismatch");
  if (!im.ti) return dense_matvec(im.ck_dense, im.n0, im.n1, v, transpose);

  const auto& ti = std::get<TranslationInvariantCost>(im.cost);
  const auto& dims = ti.grid.dims;
  const int d0 = dims[0];
  const int d1 = dims.size() == 2 ? dims[1] : 1;
  const int p1 = dims.size() == 2 ? im.padded[1] : 1;
  const int nreal = im.dft->real_count();
  const int ncplx = im.dft->complex_count();

  detail::FftwBuffer<double> real(nreal);
  detail::FftwBuffer<std::complex<double>> spec(ncplx);
  real.zero();
  if (dims.size() == 2) {
    for (int r = 0; r < d0; ++r)
      std::copy(v.begin() + static_cast<std::size_t>(r) * d1,
                v.begin() + static_cast<std::size_t>(r + 1) * d1, real.data() + r * p1);
  } else {
    std::copy(v.begin(), v.end(), real.data());
  }
  im.dft->forward(real.data(), spec.data());
  for (int k = 0; k < ncplx; ++k) spec.data()[k] *= im.ckhat[k];
  im.dft->inverse(spec.data(), real.data());

  const double scale = 1.0 / nreal;
  Vec y(im.n1);
  if (dims.size() == 2) {
    for (int r = 0; r < d0; ++r)
      for (int c = 0; c < d1; ++c) y[static_cast<std::size_t>(r) * d1 + c] = real.data()[r * p1 + c] * scale;
  } else {
    for (int i = 0; i < d0; ++i) y[i] = real.data()[i] * scale;
  }
  double maxabs = 0.0;
  for (double t : y) maxabs = std::max(maxabs, std::abs(t));
  const double floor_v = -kClampRelThreshold * maxabs;
  for (double& t : y) {
    if (t < 0.0) {
      if (t < floor_v)
        throw NumericalError("KernelOperator::apply_cost_kernel: negative value beyond round-off");
      t = 0.0;
      im.clamp_count.fetch_add(1, std::memory_order_relaxed);
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Dual terms

double g_conjugate_neg(const DataTerm& term, const Vec& lambda1) {
  if (const auto* pm = std::get_if<PointMassTerm>(&term)) {
    // g*(-lambda1) = -lambda1^T mu1; zero-mass entries contribute nothing
    // even when the matching potential is -inf.
    double s = 0.0;
    for (std::size_t j = 0; j < lambda1.size(); ++j)
      if (pm->mu1[j] != 0.0) s -= lambda1[j] * pm->mu1[j];
    return s;
  }
  const auto& q = std::get<QuadraticTerm>(term);
  // g*(lambda) = lambda^T (mu1 + sigma/2 lambda)
  double s = 0.0;
  for (std::size_t j = 0; j < lambda1.size(); ++j)
    s += -lambda1[j] * q.mu1[j] + 0.5 * q.sigma * lambda1[j] * lambda1[j];
  return s;
}

namespace {

const Vec& term_mu1(const DataTerm& term) {
  if (const auto* pm = std::get_if<PointMassTerm>(&term)) return pm->mu1;
  return std::get<QuadraticTerm>(term).mu1;
}

void validate_term(const DataTerm& term, int n1, double mass0) {
  const Vec& mu1 = term_mu1(term);
  if (static_cast<int>(mu1.size()) != n1)
    throw DimensionError("data term: mu1 length mismatch");
  if (const auto* pm = std::get_if<PointMassTerm>(&term)) {
    double mass1 = 0.0;
    for (double m : pm->mu1) {
      if (!(m >= 0.0) || !std::isfinite(m))
        throw ModelError("sinkhorn: mu1 must be nonnegative and finite");
      mass1 += m;
    }
    if (std::abs(mass1 - mass0) > kMassMatchRelTol * std::max(mass0, 1.0))
      throw ModelError("sinkhorn: total masses differ (" + std::to_string(mass0) + " vs " +
                       std::to_string(mass1) + ")");
  } else {
    const auto& q = std::get<QuadraticTerm>(term);
    if (!(q.sigma > 0.0) || !std::isfinite(q.sigma))
      throw ConfigError("omt_prox: sigma must be positive");
    if (!all_finite(q.mu1)) throw ModelError("omt_prox: mu1 must be finite");
  }
}

}  // namespace

std::pair<DualPotentials, SinkhornReport> generalized_sinkhorn(
    const Vec& mu0, const KernelOperator& K, const DataTerm& term,
    const SinkhornOptions& opts, const std::optional<DualPotentials>& warm) {
  const int n0 = K.rows();
  const int n1 = K.cols();
  const double eps = K.epsilon();
  if (static_cast<int>(mu0.size()) != n0)
    throw DimensionError("generalized_sinkhorn: mu0 length mismatch");
  double mass0 = 0.0;
  for (double m : mu0) {
    if (!(m > 0.0) || !std::isfinite(m))
      throw ModelError("generalized_sinkhorn: mu0 must be strictly positive");
    mass0 += m;
  }
  validate_term(term, n1, mass0);
  if (opts.max_iter < 1) throw ConfigError("generalized_sinkhorn: max_iter must be >= 1");

  const bool point_mass = std::holds_alternative<PointMassTerm>(term);
  const Vec& mu1 = term_mu1(term);

  DualPotentials pots;
  pots.lambda0 = warm ? warm->lambda0 : Vec(n0, 0.0);
  pots.lambda1 = warm ? warm->lambda1 : Vec(n1, 0.0);
  if (warm && (static_cast<int>(pots.lambda0.size()) != n0 ||
               static_cast<int>(pots.lambda1.size()) != n1))
    throw DimensionError("generalized_sinkhorn: warm-start potential shape mismatch");

  Vec u1(n1);
  for (int j = 0; j < n1; ++j) {
    u1[j] = std::exp(pots.lambda1[j] / eps);
    if (!std::isfinite(u1[j]))
      throw NumericalError("generalized_sinkhorn: warm-start scaling overflowed");
  }
  Vec a = K.apply(u1);  // K u1, kept in sync with the newest lambda1

  SinkhornReport rep;
  Vec u0(n0), b;
  bool converged = false;
  int it = 0;
  while (it < opts.max_iter) {
    ++it;
    for (int i = 0; i < n0; ++i) {
      if (!(a[i] > 0.0))
        throw NumericalError("generalized_sinkhorn: K u1 vanished at index " + std::to_string(i));
      pots.lambda0[i] = eps * std::log(mu0[i] / a[i]);
    }
    if (opts.half_step_observer) opts.half_step_observer(it, 0, pots);
    u0 = exp_scaled(pots.lambda0, eps, "generalized_sinkhorn");
    b = K.apply(u0, true);

    if (point_mass) {
      for (int j = 0; j < n1; ++j)
        pots.lambda1[j] = mu1[j] > 0.0
                              ? eps * std::log(mu1[j] / b[j])
                              : -std::numeric_limits<double>::infinity();
    } else {
      const double sigma = std::get<QuadraticTerm>(term).sigma;
      const double se = sigma * eps;
      const double log_se = std::log(se);
      for (int j = 0; j < n1; ++j) {
        if (!(b[j] > 0.0))
          throw NumericalError("generalized_sinkhorn: K^T u0 vanished at index " +
                               std::to_string(j));
        const double arg = mu1[j] / se + std::log(b[j]) - log_se;
        pots.lambda1[j] = mu1[j] / sigma - eps * wright_omega(arg);
      }
    }
    if (opts.half_step_observer) opts.half_step_observer(it, 1, pots);

    for (int j = 0; j < n1; ++j) {
      u1[j] = std::exp(pots.lambda1[j] / eps);
      if (!std::isfinite(u1[j]))
        throw NumericalError("generalized_sinkhorn: scaling overflow; consider a larger epsilon");
    }
    a = K.apply(u1);

    double governing = 0.0;
    if (point_mass) {
      double r_row = 0.0, r_col = 0.0;
      for (int i = 0; i < n0; ++i) r_row += std::abs(u0[i] * a[i] - mu0[i]);
      for (int j = 0; j < n1; ++j) r_col += std::abs(u1[j] * b[j] - mu1[j]);
      rep.marginal_residual_row = r_row;
      rep.marginal_residual_col_or_kkt = r_col;
      governing = std::max(r_row, r_col) / mass0;
      converged = opts.tol > 0 && r_row <= opts.tol * mass0 && r_col <= opts.tol * mass0;
    } else {
      // lambda1 satisfies its equation by construction; the KKT residual is
      // the violation of the lambda0 equation by the fresh lambda1.
      double raw = 0.0, r_row = 0.0;
      for (int i = 0; i < n0; ++i) {
        raw = std::max(raw, std::abs(pots.lambda0[i] - eps * std::log(mu0[i] / a[i])));
        r_row += std::abs(u0[i] * a[i] - mu0[i]);
      }
      double lmax = 0.0;
      for (double l : pots.lambda0) lmax = std::max(lmax, std::abs(l));
      for (double l : pots.lambda1) lmax = std::max(lmax, std::abs(l));
      governing = raw / (eps * (1.0 + lmax));
      rep.marginal_residual_row = r_row;
      rep.marginal_residual_col_or_kkt = governing;
      converged = opts.tol > 0 && governing <= opts.tol;
    }
    if (opts.residual_observer) opts.residual_observer(it, governing);
    if (converged && !opts.fixed_iteration_count) break;
  }

  rep.iterations = it;
  rep.converged = opts.tol > 0 ? converged : true;
  rep.dual_value = dual_objective(mu0, term, K, pots);
  rep.primal_value = primal_value(K, pots);
  if (!point_mass) {
    const auto& q = std::get<QuadraticTerm>(term);
    Vec mu_est(n1);
    for (int j = 0; j < n1; ++j) mu_est[j] = u1[j] * b[j];
    double quad = 0.0;
    for (int j = 0; j < n1; ++j) {
      const double d = mu_est[j] - q.mu1[j];
      quad += d * d;
    }
    rep.primal_value += quad / (2.0 * q.sigma);
  }
  return {std::move(pots), rep};
}

std::pair<DualPotentials, SinkhornReport> sinkhorn(const Vec& mu0, const Vec& mu1,
                                                   const KernelOperator& K, double tol,
                                                   int max_iter,
                                                   const std::optional<DualPotentials>& warm) {
  SinkhornOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return generalized_sinkhorn(mu0, K, PointMassTerm{mu1}, opts, warm);
}

OmtProxResult omt_prox(const Vec& mu0, const Vec& mu1, double sigma, const KernelOperator& K,
                       const SinkhornOptions& inner, const std::optional<DualPotentials>& warm) {
  auto [pots, rep] = generalized_sinkhorn(mu0, K, QuadraticTerm{mu1, sigma}, inner, warm);
  OmtProxResult res;
  res.mu_est = plan_second_marginal(K, pots);
  res.potentials = std::move(pots);
  res.report = rep;
  return res;
}

double primal_value(const KernelOperator& K, const DualPotentials& potentials) {
  const double eps = K.epsilon();
  const int n0 = K.rows();
  const int n1 = K.cols();
  const Vec u0 = exp_scaled(potentials.lambda0, eps, "primal_value");
  Vec u1(potentials.lambda1.size());
  for (std::size_t j = 0; j < u1.size(); ++j) {
    u1[j] = std::exp(potentials.lambda1[j] / eps);  // -inf maps to 0
    if (!std::isfinite(u1[j]))
      throw NumericalError("primal_value: scaling overflow; consider a larger epsilon");
  }
  const Vec Ku1 = K.apply(u1);
  const Vec Ktu0 = K.apply(u0, true);
  const Vec CKu1 = K.apply_cost_kernel(u1);

  const double trace_cm = dot(u0, CKu1);
  double plan_mass = 0.0, lam0_term = 0.0, lam1_term = 0.0;
  for (int i = 0; i < n0; ++i) {
    const double row = u0[i] * Ku1[i];
    plan_mass += row;
    lam0_term += potentials.lambda0[i] * row;
  }
  for (int j = 0; j < n1; ++j) {
    const double col = u1[j] * Ktu0[j];
    if (col != 0.0) lam1_term += potentials.lambda1[j] * col;
  }
  const double entropy =
      lam0_term + lam1_term - trace_cm - eps * plan_mass + eps * static_cast<double>(n0) * n1;
  return trace_cm + entropy;
}

double dual_objective(const Vec& mu0, const DataTerm& term, const KernelOperator& K,
                      const DualPotentials& potentials) {
  const double eps = K.epsilon();
  const Vec u0 = exp_scaled(potentials.lambda0, eps, "dual_objective");
  Vec u1(potentials.lambda1.size());
  for (std::size_t j = 0; j < u1.size(); ++j) {
    u1[j] = std::exp(potentials.lambda1[j] / eps);
    if (!std::isfinite(u1[j]))
      throw NumericalError("dual_objective: scaling overflow; consider a larger epsilon");
  }
  const double cross = dot(u0, K.apply(u1));
  return dot(potentials.lambda0, mu0) - g_conjugate_neg(term, potentials.lambda1) -
         eps * cross + eps * static_cast<double>(K.rows()) * K.cols();
}

Vec kl_prox_quadratic(const Vec& z, const Vec& mu1, double sigma, double epsilon) {
  if (!(sigma > 0.0) || !(epsilon > 0.0))
    throw ConfigError("kl_prox_quadratic: sigma and epsilon must be positive");
  if (z.size() != mu1.size()) throw DimensionError("kl_prox_quadratic: length mismatch");
  const double se = sigma * epsilon;
  const double log_se = std::log(se);
  Vec out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(z[i] > 0.0)) throw DomainError("kl_prox_quadratic: z must be strictly positive");
    out[i] = se * wright_omega(mu1[i] / se + std::log(z[i]) - log_se);
  }
  return out;
}

std::vector<ScalingPair> algorithm3_iterate(const Vec& mu0, const KernelOperator& K,
                                            const QuadraticTerm& term, int iters) {
  const int n0 = K.rows();
  const int n1 = K.cols();
  if (static_cast<int>(mu0.size()) != n0)
    throw DimensionError("algorithm3_iterate: mu0 length mismatch");
  for (double m : mu0)
    if (!(m > 0.0)) throw ModelError("algorithm3_iterate: mu0 must be strictly positive");
  validate_term(DataTerm{term}, n1, sum(mu0));

  std::vector<ScalingPair> seq;
  seq.reserve(iters);
  Vec u1(n1, 1.0);
  for (int l = 0; l < iters; ++l) {
    const Vec a = K.apply(u1);
    Vec u0(n0);
    for (int i = 0; i < n0; ++i) {
      if (!(a[i] > 0.0)) throw NumericalError("algorithm3_iterate: K u1 vanished");
      u0[i] = mu0[i] / a[i];
    }
    const Vec b = K.apply(u0, true);
    const Vec p = kl_prox_quadratic(b, term.mu1, term.sigma, K.epsilon());
    for (int j = 0; j < n1; ++j) u1[j] = p[j] / b[j];
    seq.push_back({u0, u1});
  }
  return seq;
}

Vec apply_plan(const KernelOperator& K, const DualPotentials& potentials, const Vec& v,
               PlanDirection direction) {
  const double eps = K.epsilon();
  const Vec u0 = exp_scaled(potentials.lambda0, eps, "apply_plan");
  Vec u1(potentials.lambda1.size());
  for (std::size_t j = 0; j < u1.size(); ++j) {
    u1[j] = std::exp(potentials.lambda1[j] / eps);
    if (!std::isfinite(u1[j])) throw NumericalError("apply_plan: scaling overflow");
  }
  if (direction == PlanDirection::forward) {
    if (v.size() != u0.size()) throw DimensionError("apply_plan: expected a row-space vector");
    Vec t(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) t[i] = u0[i] * v[i];
    Vec y = K.apply(t, true);
    for (std::size_t j = 0; j < y.size(); ++j) y[j] *= u1[j];
    return y;
  }
  if (v.size() != u1.size()) throw DimensionError("apply_plan: expected a column-space vector");
  Vec t(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) t[j] = u1[j] * v[j];
  Vec y = K.apply(t);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= u0[i];
  return y;
}

Vec plan_second_marginal(const KernelOperator& K, const DualPotentials& potentials) {
  return apply_plan(K, potentials, Vec(K.rows(), 1.0), PlanDirection::forward);
}

// ---------------------------------------------------------------------------
// LP oracle

double exact_transport_lp(const Vec& mu0, const Vec& mu1, const DenseCost& cost) {
  const int n0 = cost.n0, n1 = cost.n1;
  if (n0 < 1 || n1 < 1 || n0 > 3 || n1 > 3)
    throw ConfigError("exact_transport_lp: supported sizes are at most 3x3");
  if (static_cast<int>(mu0.size()) != n0 || static_cast<int>(mu1.size()) != n1)
    throw DimensionError("exact_transport_lp: marginal length mismatch");
  const double mass0 = sum(mu0), mass1 = sum(mu1);
  if (std::abs(mass0 - mass1) > kMassMatchRelTol * std::max(mass0, 1.0))
    throw ModelError("exact_transport_lp: masses must balance");

  const int n_edges = n0 * n1;
  const int n_nodes = n0 + n1;
  const int tree_edges = n_nodes - 1;
  const double feas_tol = 1e-12 * std::max(mass0, 1.0);

  double best = std::numeric_limits<double>::infinity();
  // Every basic feasible solution of the transportation polytope is supported
  // on a spanning tree of the bipartite supply/demand graph; enumerate them.
  for (int mask = 0; mask < (1 << n_edges); ++mask) {
    if (std::popcount(static_cast<unsigned>(mask)) != tree_edges) continue;

    int degree[6] = {0};
    for (int e = 0; e < n_edges; ++e)
      if (mask & (1 << e)) {
        ++degree[e / n1];
        ++degree[n0 + e % n1];
      }

    // Peel leaves; a spanning tree empties completely with consistent flows.
    Vec rem0 = mu0, rem1 = mu1;
    Vec flow(n_edges, 0.0);
    bool used[9] = {false};
    int deg[6];
    std::copy(degree, degree + n_nodes, deg);
    bool ok = true;
    for (int step = 0; step < tree_edges; ++step) {
      int leaf = -1;
      for (int v = 0; v < n_nodes; ++v)
        if (deg[v] == 1) {
          leaf = v;
          break;
        }
      if (leaf < 0) {
        ok = false;  // cycle: not a tree
        break;
      }
      int edge = -1;
      for (int e = 0; e < n_edges; ++e) {
        if (!(mask & (1 << e)) || used[e]) continue;
        if (e / n1 == leaf || n0 + e % n1 == leaf) {
          edge = e;
          break;
        }
      }
      if (edge < 0) {
        ok = false;
        break;
      }
      const int i = edge / n1, j = edge % n1;
      const double f = (leaf < n0) ? rem0[i] : rem1[j];
      flow[edge] = f;
      rem0[i] -= f;
      rem1[j] -= f;
      used[edge] = true;
      --deg[i];
      --deg[n0 + j];
    }
    if (!ok) continue;
    // Disconnected edge sets leave unrouted mass behind.
    bool feasible = true;
    for (int i = 0; i < n0 && feasible; ++i) feasible = std::abs(rem0[i]) <= feas_tol;
    for (int j = 0; j < n1 && feasible; ++j) feasible = std::abs(rem1[j]) <= feas_tol;
    for (int e = 0; e < n_edges && feasible; ++e) feasible = flow[e] >= -feas_tol;
    if (!feasible) continue;

    double value = 0.0;
    for (int e = 0; e < n_edges; ++e)
      value += std::max(flow[e], 0.0) * cost.values[static_cast<std::size_t>(e / n1) * n1 + e % n1];
    best = std::min(best, value);
  }
  if (!std::isfinite(best))
    throw NumericalError("exact_transport_lp: no feasible basis found");
  return best;
}

}  // namespace otprox
