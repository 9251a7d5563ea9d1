#include "fracland/fde/volterra.hpp"

#include <cmath>
#include <optional>
#include <complex>
#include <map>
#include <string>

#include "fracland/errors.hpp"
#include "fracland/util/fft.hpp"

namespace fracland::fde {

HistoryWeights::HistoryWeights(double alpha, double h, std::size_t n_max)
    : alpha_(alpha),
      cp_(std::pow(h, alpha) / std::tgamma(alpha + 1.0)),
      cc_(std::pow(h, alpha) / std::tgamma(alpha + 2.0)),
      b_(n_max + 1),
      a_(n_max + 1) {
  const double p = alpha + 1.0;
  b_[0] = 1.0;
  a_[0] = 0.0;
  for (std::size_t k = 1; k <= n_max; ++k) {
    const double kd = static_cast<double>(k);
    b_[k] = std::pow(kd, alpha) * std::expm1(alpha * std::log1p(1.0 / kd));
    if (k == 1) {
      a_[k] = std::pow(2.0, p) - 2.0;
    } else {
      a_[k] = std::pow(kd, p) * (std::expm1(p * std::log1p(1.0 / kd)) + std::expm1(p * std::log1p(-1.0 / kd)));
    }
  }
}

double HistoryWeights::trap_first(std::size_t n) const {
  if (n == 0) return alpha_;
  const double nd = static_cast<double>(n);
  return std::pow(nd, alpha_) * (alpha_ - (nd - alpha_) * std::expm1(alpha_ * std::log1p(1.0 / nd)));
}

namespace {

constexpr std::size_t kBaseBlock = 64;
constexpr int kNewtonMaxIter = 50;

class Integrator {
 public:
  Integrator(const NodeDrift& drift, MemoryOrder order, double x0, const SolverGrid& grid,
             const SolverOptions& options, const NoiseDrive* noise, const StopRule& stop)
      : drift_(drift),
        alpha_(order.alpha()),
        x0_(x0),
        n_(grid.n_steps()),
        opt_(options),
        noise_(noise),
        stop_(stop),
        inv_sqrt_h_(1.0 / std::sqrt(grid.h())),
        w_(order.alpha(), grid.h(), grid.n_steps()) {
    if (options.corrector_iters < 1) throw DomainError("solver: corrector_iters must be >= 1");
    if (noise_ && noise_->eta.size() < n_) throw DomainError("solver: noise path shorter than the grid");
    if (noise_ && !noise_->amplitude) throw DomainError("solver: noise amplitude missing");
  }

  VolterraResult run() {
    if (alpha_ == 1.0) {
      run_memoryless();
    } else if (opt_.history == HistoryMethod::kFft && opt_.window == 0) {
      run_fft();
    } else {
      run_direct();
    }
    x_.resize(last_ + 1);
    return {std::move(x_), stopped_};
  }

 private:
  void allocate(std::size_t size) {
    x_.assign(size, 0.0);
    f_.assign(size, 0.0);
    u_.assign(size, 0.0);
    acc_p_.assign(size, 0.0);
    acc_u_.assign(size, 0.0);
    acc_c_.assign(size, 0.0);
  }

  [[noreturn]] void diverge(std::size_t m, const std::string& why) const {
    throw DivergenceError("solver: " + why + " at node " + std::to_string(m), m == 0 ? 0 : m - 1);
  }

  void check(std::size_t m, double y) const {
    if (!std::isfinite(y)) diverge(m, "non-finite state");
    if (y < opt_.lower_bound || y > opt_.upper_bound) diverge(m, "state left admissible box");
  }

  double eval(std::size_t m, double y) const {
    try {
      return drift_(m, y);
    } catch (const DomainError& e) {
      diverge(m, e.what());
    }
  }

  double forcing(std::size_t m, double y) const {
    if (!noise_ || m >= n_) return 0.0;
    return noise_->amplitude(y) * noise_->eta[m] * inv_sqrt_h_;
  }

  void start() {
    check(0, x0_);
    x_[0] = x0_;
    f_[0] = eval(0, x0_);
    u_[0] = forcing(0, x0_);
    last_ = 0;
    if (stop_ && stop_(0, x0_)) stopped_ = true;
  }

  /// Completes node m from its accumulated history sums.
  /// pred = sum b (f + u), pu = sum b u, corr = trapezoid history of f.
  void finish(std::size_t m, double pred, double pu, double corr) {
    const double cp = w_.predictor_scale();
    const double cc = w_.corrector_scale();
    double y = x0_ + cp * pred;
    if (opt_.corrector == CorrectorMethod::kNewton) {
      y = newton(m, y, x0_ + cc * corr + cp * pu, cc);
    } else {
      check(m, y);
      for (int k = 0; k < opt_.corrector_iters; ++k) {
        y = x0_ + cc * (eval(m, y) + corr) + cp * pu;
        check(m, y);
      }
    }
    x_[m] = y;
    f_[m] = eval(m, y);
    u_[m] = forcing(m, y);
    last_ = m;
    if (stop_ && stop_(m, y)) stopped_ = true;
  }

  std::optional<double> try_eval(std::size_t m, double y) const {
    if (!std::isfinite(y)) return std::nullopt;
    try {
      const double f = drift_(m, y);
      if (std::isfinite(f)) return f;
    } catch (const DomainError&) {
    }
    return std::nullopt;
  }

  /// Root of y - c - cc F(y) by damped Newton with a central difference slope.
  /// Starts from the predictor, or from the previous node if the predictor is
  /// outside the drift's domain.
  double newton(std::size_t m, double guess, double c, double cc) const {
    double y = guess;
    auto fy = try_eval(m, y);
    if (!fy) {
      y = x_[m - 1];
      fy = try_eval(m, y);
      if (!fy) diverge(m, "drift undefined at the previous state");
    }
    for (int it = 0; it < kNewtonMaxIter; ++it) {
      const double g = y - c - cc * *fy;
      if (std::abs(g) <= 1e-14 * (1.0 + std::abs(y))) break;
      const double e = 1e-7 * (1.0 + std::abs(y));
      const auto fp = try_eval(m, y + e);
      const auto fm = try_eval(m, y - e);
      double slope = fp && fm ? 1.0 - cc * (*fp - *fm) / (2.0 * e) : 1.0;
      if (!(std::abs(slope) > 1e-12)) slope = 1.0;
      double step = -g / slope;
      std::optional<double> f_new;
      for (int k = 0; k < 40; ++k) {
        f_new = try_eval(m, y + step);
        if (f_new && std::abs(y + step - c - cc * *f_new) < std::abs(g)) break;
        f_new.reset();
        step *= 0.5;
      }
      if (!f_new) break;
      y += step;
      fy = f_new;
    }
    check(m, y);
    if (std::abs(y - c - cc * *fy) > 1e-8 * (1.0 + std::abs(y))) diverge(m, "corrector equation did not converge");
    return y;
  }

  void run_memoryless() {
    allocate(n_ + 1);
    start();
    double sum_f = f_[0];
    double sum_u = u_[0];
    for (std::size_t m = 1; m <= n_ && !stopped_; ++m) {
      // a_0 = 1 and interior trapezoid weights equal 2 at alpha = 1
      finish(m, sum_f + sum_u, sum_u, 2.0 * sum_f - f_[0]);
      sum_f += f_[m];
      sum_u += u_[m];
    }
  }

  void run_direct() {
    allocate(n_ + 1);
    start();
    for (std::size_t m = 1; m <= n_ && !stopped_; ++m) {
      const std::size_t lo = (opt_.window > 0 && m > opt_.window) ? m - opt_.window : 0;
      double pf = 0.0;
      double pu = 0.0;
      double corr = 0.0;
      for (std::size_t j = lo; j < m; ++j) {
        const double b = w_.rect(m - 1 - j);
        pf += b * f_[j];
        pu += b * u_[j];
      }
      if (lo == 0) corr += w_.trap_first(m - 1) * f_[0];
      for (std::size_t j = std::max<std::size_t>(lo, 1); j < m; ++j) corr += w_.trap(m - j) * f_[j];
      finish(m, pf + pu, pu, corr);
    }
  }

  // Online convolution: recursive halving. Left halves feed the history sums of
  // right halves through one FFT product per node of the recursion tree.
  void run_fft() {
    std::size_t size = kBaseBlock;
    while (size < n_ + 1) size *= 2;
    allocate(size);
    solve(0, size);
  }

  void solve(std::size_t l, std::size_t r) {
    if (stopped_ || l > n_) return;
    if (r - l <= kBaseBlock) {
      for (std::size_t m = l; m < r && m <= n_ && !stopped_; ++m) {
        if (m == 0) {
          start();
          continue;
        }
        for (std::size_t j = l; j < m; ++j) {
          const double b = w_.rect(m - 1 - j);
          acc_p_[m] += b * (f_[j] + u_[j]);
          acc_u_[m] += b * u_[j];
          if (j > 0) acc_c_[m] += w_.trap(m - j) * f_[j];
        }
        finish(m, acc_p_[m], acc_u_[m], acc_c_[m] + w_.trap_first(m - 1) * f_[0]);
      }
      return;
    }
    const std::size_t mid = l + (r - l) / 2;
    solve(l, mid);
    if (stopped_ || mid > n_) return;
    contribute(l, mid, r);
    solve(mid, r);
  }

  struct Level {
    util::RealFft fft;
    std::vector<std::complex<double>> kern_rect;
    std::vector<std::complex<double>> kern_trap;
    explicit Level(std::size_t n) : fft(n) {}
  };

  Level& level(std::size_t len) {
    auto it = levels_.find(len);
    if (it != levels_.end()) return it->second;
    Level& lv = levels_.emplace(len, Level(len)).first->second;
    std::vector<double> k(len, 0.0);
    for (std::size_t e = 1; e < len && e - 1 <= n_; ++e) k[e] = w_.rect(e - 1);
    lv.kern_rect.resize(lv.fft.spectrum_size());
    lv.fft.forward(k.data(), lv.kern_rect.data());
    std::fill(k.begin(), k.end(), 0.0);
    for (std::size_t e = 1; e < len && e <= n_; ++e) k[e] = w_.trap(e);
    lv.kern_trap.resize(lv.fft.spectrum_size());
    lv.fft.forward(k.data(), lv.kern_trap.data());
    return lv;
  }

  // Circular convolution of length L = r - l is exact here: lags between
  // sources in [l, mid) and targets in [mid, r) lie in [1, L).
  void contribute(std::size_t l, std::size_t mid, std::size_t r) {
    const std::size_t len = r - l;
    const std::size_t half = len / 2;
    Level& lv = level(len);
    const std::size_t nspec = lv.fft.spectrum_size();
    const double scale = 1.0 / static_cast<double>(len);
    buf_.assign(len, 0.0);
    spec_a_.resize(nspec);
    spec_b_.resize(nspec);
    out_.resize(len);

    for (std::size_t i = 0; i < half; ++i) buf_[i] = f_[l + i] + u_[l + i];
    lv.fft.forward(buf_.data(), spec_a_.data());
    for (std::size_t k = 0; k < nspec; ++k) spec_a_[k] *= lv.kern_rect[k];
    lv.fft.inverse(spec_a_.data(), out_.data());
    const std::size_t stop = std::min(r, n_ + 1);
    for (std::size_t m = mid; m < stop; ++m) acc_p_[m] += scale * out_[m - l];

    for (std::size_t i = 0; i < half; ++i) buf_[i] = (l + i == 0) ? 0.0 : f_[l + i];
    lv.fft.forward(buf_.data(), spec_b_.data());
    for (std::size_t k = 0; k < nspec; ++k) spec_b_[k] *= lv.kern_trap[k];
    lv.fft.inverse(spec_b_.data(), out_.data());
    for (std::size_t m = mid; m < stop; ++m) acc_c_[m] += scale * out_[m - l];

    if (noise_) {
      for (std::size_t i = 0; i < half; ++i) buf_[i] = u_[l + i];
      lv.fft.forward(buf_.data(), spec_a_.data());
      for (std::size_t k = 0; k < nspec; ++k) spec_a_[k] *= lv.kern_rect[k];
      lv.fft.inverse(spec_a_.data(), out_.data());
      for (std::size_t m = mid; m < stop; ++m) acc_u_[m] += scale * out_[m - l];
    }
  }

  const NodeDrift& drift_;
  double alpha_;
  double x0_;
  std::size_t n_;
  SolverOptions opt_;
  const NoiseDrive* noise_;
  const StopRule& stop_;
  double inv_sqrt_h_;
  HistoryWeights w_;

  std::vector<double> x_, f_, u_, acc_p_, acc_u_, acc_c_;
  std::size_t last_ = 0;
  bool stopped_ = false;

  std::map<std::size_t, Level> levels_;
  std::vector<double> buf_, out_;
  std::vector<std::complex<double>> spec_a_, spec_b_;
};

}  // namespace

VolterraResult integrate_volterra(const NodeDrift& drift, MemoryOrder order, double x0, const SolverGrid& grid,
                                  const SolverOptions& options, const NoiseDrive* noise, const StopRule& stop) {
  Integrator integ(drift, order, x0, grid, options, noise, stop);
  return integ.run();
}

}  // namespace fracland::fde
