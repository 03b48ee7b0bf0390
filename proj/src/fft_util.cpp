#include "fft_util.hpp"

#include <mutex>
#include <stdexcept>

namespace otprox::detail {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

int next_fast_size(int n) {
  if (n < 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

RealDft::RealDft(std::vector<int> shape) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 2)
    throw std::invalid_argument("RealDft: rank must be 1 or 2");
  real_count_ = 1;
  for (int d : shape_) real_count_ *= d;
  complex_count_ = (real_count_ / shape_.back()) * (shape_.back() / 2 + 1);

  FftwBuffer<double> rbuf(real_count_);
  FftwBuffer<std::complex<double>> cbuf(complex_count_);
  rbuf.zero();
  cbuf.zero();

  std::lock_guard<std::mutex> lock(planner_mutex());
  fwd_ = fftw_plan_dft_r2c(static_cast<int>(shape_.size()), shape_.data(), rbuf.data(),
                           reinterpret_cast<fftw_complex*>(cbuf.data()), FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_c2r(static_cast<int>(shape_.size()), shape_.data(),
                           reinterpret_cast<fftw_complex*>(cbuf.data()), rbuf.data(),
                           FFTW_ESTIMATE);
  if (!fwd_ || !inv_) throw std::runtime_error("RealDft: FFTW planning failed");
}

RealDft::~RealDft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (fwd_) fftw_destroy_plan(fwd_);
  if (inv_) fftw_destroy_plan(inv_);
}

void RealDft::forward(double* in, std::complex<double>* out) const {
  fftw_execute_dft_r2c(fwd_, in, reinterpret_cast<fftw_complex*>(out));
}

void RealDft::inverse(std::complex<double>* in, double* out) const {
  fftw_execute_dft_c2r(inv_, reinterpret_cast<fftw_complex*>(in), out);
}

}  // namespace otprox::detail
