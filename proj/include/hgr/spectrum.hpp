#pragma once

#include <hgr/error.hpp>

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace hgr {

enum class Taper { None, Hann };

/// One-sided power spectrum. power[k] sits at freq[k] = k * rate / n; the
/// scaling makes sum(power) equal the energy of the (tapered) input.
struct Spectrum {
  std::vector<double> freq;
  std::vector<double> power;
};

/// Reusable periodogram engine; keeps FFT plans and buffers between calls.
/// Not thread-safe; use one per thread.
class Periodogram {
 public:
  const Spectrum& compute(std::span<const double> x, double rate_hz, Taper taper, bool remove_mean) {
    const std::size_t n = x.size();
    if (n < 2) fail(ErrorCode::SignalTooShort, "periodogram needs at least 2 samples");
    double mean = 0.0;
    if (remove_mean) {
      for (double v : x) mean += v;
      mean /= static_cast<double>(n);
    }
    if (taper == Taper::Hann && window_.size() != n) {
      window_.resize(n);
      // periodic Hann
      for (std::size_t i = 0; i < n; ++i)
        window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(n));
    }
    buf_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x[i] - mean;
      buf_[i] = taper == Taper::Hann ? v * window_[i] : v;
    }
    fft_.fwd(bins_, buf_);

    const std::size_t half = n / 2;
    out_.freq.resize(half + 1);
    out_.power.resize(half + 1);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k <= half; ++k) {
      const bool unique = (k == 0) || (n % 2 == 0 && k == half);
      // divide rather than multiply by 1/n so bins that land on a band edge
      // (20 Hz at 600 samples, 2 kHz) compare equal to it
      out_.freq[k] = static_cast<double>(k) * rate_hz / static_cast<double>(n);
      out_.power[k] = std::norm(bins_[k]) * inv_n * (unique ? 1.0 : 2.0);
    }
    return out_;
  }

 private:
  Eigen::FFT<double> fft_;
  std::vector<double> window_;
  std::vector<double> buf_;
  std::vector<std::complex<double>> bins_;
  Spectrum out_;
};

inline Spectrum periodogram(std::span<const double> x, double rate_hz, Taper taper = Taper::None,
                            bool remove_mean = false) {
  Periodogram p;
  return p.compute(x, rate_hz, taper, remove_mean);
}

}  // namespace hgr
