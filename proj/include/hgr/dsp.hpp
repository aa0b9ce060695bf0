#pragma once

#include <hgr/core.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace hgr::dsp {

struct FilterSpec {
  double notch_hz = 60.0;
  double notch_q = 30.0;
  double band_lo_hz = 20.0;
  double band_hi_hz = 500.0;
  int band_order = 4;  // total order, split evenly between the high- and low-pass halves
  bool zero_phase = true;

  void validate(double rate_hz) const {
    if (!(band_lo_hz > 0.0) || !(band_lo_hz < band_hi_hz))
      fail(ErrorCode::InvalidArgument, "band edges must satisfy 0 < lo < hi");
    if (!(band_hi_hz < rate_hz / 2.0))
      fail(ErrorCode::NyquistViolation, "band-pass upper edge must lie below Nyquist");
    if (notch_hz > 0.0 && !(notch_hz < rate_hz / 2.0))
      fail(ErrorCode::NyquistViolation, "notch frequency must lie below Nyquist");
    if (band_order < 2 || band_order % 2 != 0)
      fail(ErrorCode::InvalidArgument, "band_order must be a positive even integer");
    if (!(notch_q > 0.0)) fail(ErrorCode::InvalidArgument, "notch_q must be positive");
  }
};

struct SmoothSpec {
  std::size_t window_samples = 50;  // centered moving average
};

/// Second-order section, transposed direct form II, a0 normalized to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  std::complex<double> response(double f_hz, double rate_hz) const {
    const auto z1 = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / rate_hz);
    const auto z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }

  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }

  double pole_radius() const {
    const double disc = a1 * a1 - 4.0 * a2;
    if (disc < 0.0) return std::sqrt(a2);
    const double s = std::sqrt(disc);
    return std::max(std::abs((-a1 + s) / 2.0), std::abs((-a1 - s) / 2.0));
  }
};

using Sos = std::vector<Biquad>;

inline double magnitude(const Sos& sos, double f_hz, double rate_hz, bool zero_phase) {
  double g = 1.0;
  for (const auto& s : sos) g *= std::abs(s.response(f_hz, rate_hz));
  return zero_phase ? g * g : g;
}

/// Samples for the slowest pole to decay by 1/e-ish: 1 / (1 - r_max).
inline std::size_t settling_samples(const Sos& sos) {
  double r = 0.0;
  for (const auto& s : sos) r = std::max(r, s.pole_radius());
  if (r >= 1.0) fail(ErrorCode::InvalidArgument, "unstable filter");
  return static_cast<std::size_t>(std::ceil(1.0 / (1.0 - r)));
}

// ---------------------------------------------------------------------------
// Design
// ---------------------------------------------------------------------------

/// Second-order IIR notch with -3 dB bandwidth f0/Q.
inline Sos design_notch(double f0_hz, double q, double rate_hz) {
  const double w0 = 2.0 * std::numbers::pi * f0_hz / rate_hz;
  const double beta = std::tan(w0 / q / 2.0);
  const double gain = 1.0 / (1.0 + beta);
  const double c = std::cos(w0);
  return {Biquad{gain, -2.0 * gain * c, gain, -2.0 * gain * c, 2.0 * gain - 1.0}};
}

enum class Pass { Low, High };

/// Digital Butterworth by bilinear transform. `k` is the prewarped corner
/// tan(pi fc / fs); callers may move it to place the -3 dB point elsewhere.
inline Sos butterworth_from_k(int order, double k, Pass pass) {
  Sos sos;
  const double k2 = k * k;
  for (int i = 0; i < order / 2; ++i) {
    const double theta = std::numbers::pi * (2.0 * i + 1.0) / (2.0 * order);
    const double q = 1.0 / (2.0 * std::cos(theta));
    const double norm = 1.0 / (1.0 + k / q + k2);
    Biquad s;
    if (pass == Pass::Low) {
      s.b0 = k2 * norm;
      s.b1 = 2.0 * s.b0;
      s.b2 = s.b0;
    } else {
      s.b0 = norm;
      s.b1 = -2.0 * norm;
      s.b2 = norm;
    }
    s.a1 = 2.0 * (k2 - 1.0) * norm;
    s.a2 = (1.0 - k / q + k2) * norm;
    sos.push_back(s);
  }
  if (order % 2 == 1) {
    const double norm = 1.0 / (1.0 + k);
    Biquad s;
    if (pass == Pass::Low) {
      s.b0 = k * norm;
      s.b1 = s.b0;
    } else {
      s.b0 = norm;
      s.b1 = -norm;
    }
    s.a1 = (k - 1.0) * norm;
    sos.push_back(s);
  }
  return sos;
}

/// Butterworth low/high-pass whose -3 dB point lands on `fc_hz` for the
/// filter as applied: single pass, or forward-backward when `zero_phase`
/// (each pass then sits at -1.5 dB there).
inline Sos design_butterworth(int order, double fc_hz, double rate_hz, Pass pass, bool zero_phase) {
  double k = std::tan(std::numbers::pi * fc_hz / rate_hz);
  if (zero_phase) {
    const double shift = std::pow(std::numbers::sqrt2 - 1.0, 1.0 / (2.0 * order));
    k = pass == Pass::Low ? k / shift : k * shift;
  }
  return butterworth_from_k(order, k, pass);
}

inline Sos design_bandpass(const FilterSpec& spec, double rate_hz) {
  spec.validate(rate_hz);
  const int half = spec.band_order / 2;
  Sos sos = design_butterworth(half, spec.band_lo_hz, rate_hz, Pass::High, spec.zero_phase);
  const Sos lp = design_butterworth(half, spec.band_hi_hz, rate_hz, Pass::Low, spec.zero_phase);
  sos.insert(sos.end(), lp.begin(), lp.end());
  return sos;
}

// ---------------------------------------------------------------------------
// Application
// ---------------------------------------------------------------------------

/// Cascade filter. With `steady_state_from_first`, each section starts in the
/// state it would hold after an infinitely long input equal to x[0].
inline std::vector<double> sosfilt(const Sos& sos, std::span<const double> x,
                                   bool steady_state_from_first = false) {
  std::vector<double> y(x.begin(), x.end());
  double level = (steady_state_from_first && !x.empty()) ? x[0] : 0.0;
  for (const auto& s : sos) {
    double z1 = 0.0, z2 = 0.0;
    if (steady_state_from_first) {
      const double out = s.dc_gain() * level;
      z2 = s.b2 * level - s.a2 * out;
      z1 = s.b1 * level - s.a1 * out + z2;
      level = out;
    }
    for (auto& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

/// Forward-backward filtering with odd-reflection padding and steady-state
/// initial conditions. Linear in x; zero phase.
inline std::vector<double> sosfiltfilt(const Sos& sos, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) fail(ErrorCode::SignalTooShort, "forward-backward filtering needs at least 2 samples");
  const std::size_t pad = std::min(n - 1, 3 * settling_samples(sos));
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  auto fwd = sosfilt(sos, ext, true);
  std::reverse(fwd.begin(), fwd.end());
  auto bwd = sosfilt(sos, fwd, true);
  std::reverse(bwd.begin(), bwd.end());
  return {bwd.begin() + static_cast<std::ptrdiff_t>(pad),
          bwd.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

inline std::vector<double> apply(const Sos& sos, std::span<const double> x, bool zero_phase) {
  return zero_phase ? sosfiltfilt(sos, x) : sosfilt(sos, x, true);
}

/// Powerline notch. Requires more than three settling lengths of signal.
inline std::vector<double> notch_filter(std::span<const double> x, double rate_hz,
                                        const FilterSpec& spec) {
  if (!(spec.notch_hz > 0.0 && spec.notch_hz < rate_hz / 2.0))
    fail(ErrorCode::NyquistViolation, "notch frequency must lie in (0, Nyquist)");
  const Sos sos = design_notch(spec.notch_hz, spec.notch_q, rate_hz);
  if (x.size() <= 3 * settling_samples(sos))
    fail(ErrorCode::SignalTooShort, "signal shorter than three notch settling lengths");
  return apply(sos, x, spec.zero_phase);
}

inline std::vector<double> bandpass_filter(std::span<const double> x, double rate_hz,
                                           const FilterSpec& spec) {
  if (!(rate_hz > 2.0 * spec.band_hi_hz))
    fail(ErrorCode::NyquistViolation, "rate must exceed twice the upper band edge");
  return apply(design_bandpass(spec, rate_hz), x, spec.zero_phase);
}

/// Centered moving average; even windows cover [i - w/2, i + w/2 - 1].
/// Edges average over the truncated window.
inline std::vector<double> smooth(std::span<const double> x, const SmoothSpec& spec) {
  const std::size_t w = spec.window_samples;
  if (w == 0) fail(ErrorCode::InvalidArgument, "smoothing window must be >= 1");
  if (w > x.size()) fail(ErrorCode::WindowTooLarge, "smoothing window longer than signal");
  if (w == 1) return {x.begin(), x.end()};  // prefix differences would add round-off
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto before = static_cast<std::ptrdiff_t>(w / 2);
  const auto after = static_cast<std::ptrdiff_t>(w) - before - 1;
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> y(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto lo = std::max<std::ptrdiff_t>(0, i - before);
    const auto hi = std::min<std::ptrdiff_t>(n, i + after + 1);
    y[static_cast<std::size_t>(i)] =
        (prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)]) /
        static_cast<double>(hi - lo);
  }
  return y;
}

/// Removes the least-squares line over the sample index.
inline std::vector<double> detrend(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) fail(ErrorCode::SignalTooShort, "detrend needs at least 2 samples");
  const double t_mean = (static_cast<double>(n) - 1.0) / 2.0;
  double x_mean = 0.0;
  for (double v : x) x_mean += v;
  x_mean /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) - t_mean;
    sxy += t * (x[i] - x_mean);
    sxx += t * t;
  }
  const double slope = sxy / sxx;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = (x[i] - x_mean) - slope * (static_cast<double>(i) - t_mean);
  return y;
}

/// Linear interpolation by an integer ratio; the last input sample is held
/// across its own segment so the output is exactly ratio * len(x) long.
inline std::vector<double> upsample_linear(std::span<const double> x, double from_hz, double to_hz) {
  const double ratio_f = to_hz / from_hz;
  const auto ratio = static_cast<std::size_t>(std::llround(ratio_f));
  if (ratio == 0 || std::abs(ratio_f - static_cast<double>(ratio)) > 1e-9)
    fail(ErrorCode::NonIntegerRatio, "target rate must be an integer multiple of the source rate");
  std::vector<double> y(x.size() * ratio);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double next = k + 1 < x.size() ? x[k + 1] : x[k];
    const double step = (next - x[k]) / static_cast<double>(ratio);
    for (std::size_t j = 0; j < ratio; ++j) y[k * ratio + j] = x[k] + step * static_cast<double>(j);
  }
  return y;
}

/// EMG: notch, band-pass, smooth, detrend. IMU: smooth, upsample to the EMG
/// rate. Channels are independent, so the result does not depend on order.
inline Recording preprocess_recording(const Recording& rec, const FilterSpec& fspec,
                                      const SmoothSpec& sspec, double target_rate_hz = kEmgRateHz) {
  Recording out;
  out.participant_id = rec.participant_id;
  out.posture = rec.posture;
  out.calibration_start_s = rec.calibration_start_s;
  out.calibration_end_s = rec.calibration_end_s;
  out.channels.reserve(rec.channels.size());
  for (const auto& c : rec.channels) {
    Channel o{c.placement, c.kind, c.rate_hz, {}};
    if (is_emg(c.kind)) {
      std::vector<double> y = c.samples;
      if (fspec.notch_hz > 0.0) y = notch_filter(y, c.rate_hz, fspec);
      y = bandpass_filter(y, c.rate_hz, fspec);
      y = smooth(y, sspec);
      y = detrend(y);
      if (c.rate_hz != target_rate_hz) {
        y = upsample_linear(y, c.rate_hz, target_rate_hz);
        o.rate_hz = target_rate_hz;
      }
      o.samples = std::move(y);
    } else {
      auto y = smooth(c.samples, sspec);
      o.samples = upsample_linear(y, c.rate_hz, target_rate_hz);
      o.rate_hz = target_rate_hz;
    }
    out.channels.push_back(std::move(o));
  }
  return out;
}

}  // namespace hgr::dsp
