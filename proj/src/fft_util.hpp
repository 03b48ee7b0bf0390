#pragma once

#include <complex>
#include <vector>

#include <fftw3.h>

namespace otprox::detail {

/// Smallest 5-smooth integer >= n (FFTW handles these sizes efficiently).
int next_fast_size(int n);

/// RAII fftw_malloc'd buffer; FFTW's allocator guarantees the alignment its
/// new-array execute interface requires.
template <typename T>
class FftwBuffer {
 public:
  explicit FftwBuffer(std::size_t n) : n_(n) {
    ptr_ = static_cast<T*>(fftw_malloc(sizeof(T) * (n ? n : 1)));
  }
  ~FftwBuffer() { fftw_free(ptr_); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  T* data() { return ptr_; }
  std::size_t size() const { return n_; }
  void zero() { std::fill(ptr_, ptr_ + n_, T{}); }

 private:
  T* ptr_;
  std::size_t n_;
};

/// Real-to-complex transform of a fixed row-major shape (rank 1 or 2).
/// Planning happens once at construction under the global planner lock;
/// forward/inverse use FFTW's new-array execute interface and are safe to
/// call concurrently with caller-owned FftwBuffer storage.
class RealDft {
 public:
  explicit RealDft(std::vector<int> shape);
  ~RealDft();
  RealDft(const RealDft&) = delete;
  RealDft& operator=(const RealDft&) = delete;

  int real_count() const { return real_count_; }
  int complex_count() const { return complex_count_; }

  void forward(double* in, std::complex<double>* out) const;
  /// Unnormalized inverse (scales by real_count()); clobbers in.
  void inverse(std::complex<double>* in, double* out) const;

 private:
  std::vector<int> shape_;
  int real_count_ = 0;
  int complex_count_ = 0;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

}  // namespace otprox::detail
