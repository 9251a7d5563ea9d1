#include "fracland/util/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

#include "fracland/errors.hpp"

namespace fracland::util {
namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
    fftw_free(real);
    fftw_free(spec);
  }
};

RealFft::RealFft(std::size_t n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n < 2) throw DomainError("RealFft: length must be at least 2");
  std::lock_guard lock(planner_mutex());
  impl_->real = fftw_alloc_real(n);
  impl_->spec = fftw_alloc_complex(n / 2 + 1);
  const int len = static_cast<int>(n);
  impl_->fwd = fftw_plan_dft_r2c_1d(len, impl_->real, impl_->spec, FFTW_ESTIMATE);
  impl_->inv = fftw_plan_dft_c2r_1d(len, impl_->spec, impl_->real, FFTW_ESTIMATE);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(const double* in, std::complex<double>* out) {
  std::memcpy(impl_->real, in, n_ * sizeof(double));
  fftw_execute(impl_->fwd);
  std::memcpy(static_cast<void*>(out), impl_->spec, spectrum_size() * sizeof(fftw_complex));
}

void RealFft::inverse(const std::complex<double>* in, double* out) {
  std::memcpy(impl_->spec, in, spectrum_size() * sizeof(fftw_complex));
  fftw_execute(impl_->inv);
  std::memcpy(out, impl_->real, n_ * sizeof(double));
}

}  // namespace fracland::util
