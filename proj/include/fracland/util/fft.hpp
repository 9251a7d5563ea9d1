#pragma once

#include <complex>
#include <cstddef>
#include <memory>

namespace fracland::util {

/// Real-to-complex FFT of fixed length n (FFTW backed). Unnormalized both ways.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

  /// in: n reals, out: n/2+1 complex.
  void forward(const double* in, std::complex<double>* out);
  /// in: n/2+1 complex, out: n reals (scaled by n relative to the true inverse).
  void inverse(const std::complex<double>* in, double* out);

 private:
  struct Impl;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fracland::util
