#pragma once

#include <hgr/hgr.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace testing {

inline std::vector<double> sine(double freq_hz, double rate_hz, std::size_t n, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate_hz + phase);
  return x;
}

inline std::vector<double> gaussian(std::size_t n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

inline double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

inline std::span<const double> middle(const std::vector<double>& x, std::size_t trim) {
  return std::span<const double>(x).subspan(trim, x.size() - 2 * trim);
}

/// Short protocol used wherever a full 372 s session would be wasteful.
inline hgr::synth::SynthSpec small_spec(std::uint64_t seed, int gestures = 5) {
  auto s = hgr::synth::SynthSpec::study_like(seed);
  s.schedule.n_gestures = gestures;
  s.schedule.pre_gesture_rest_s = 2.0;
  s.schedule.calibration_s = 5.0;
  return s;
}

}  // namespace testing
