#pragma once

// Brute-force reference implementations. Nothing here includes or calls the
// production headers: every quantity is recomputed from its definition with
// the slowest obvious algorithm (direct DFT, dense Gaussian elimination,
// exhaustive enumeration).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hgr::oracle {

// ---------------------------------------------------------------------------
// Shared random-input schema
// ---------------------------------------------------------------------------

struct InputSchema {
  std::size_t length = 600;
  double rate_hz = 2000.0;
  double noise_min = 1.0, noise_max = 100.0;  // white noise sigma
  double tone_max = 150.0;                    // sinusoid amplitude
  double offset_max = 20.0;                   // DC offset
};

/// Reproducible window for (seed, trial): noise + random tone + offset.
inline std::vector<double> random_window(std::uint64_t seed, const InputSchema& s = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  const double sigma = s.noise_min + (s.noise_max - s.noise_min) * u(rng);
  const double amp = s.tone_max * u(rng);
  const double freq = (s.rate_hz / 2.0) * u(rng);
  const double phase = 2.0 * std::numbers::pi * u(rng);
  const double offset = s.offset_max * (2.0 * u(rng) - 1.0);
  std::vector<double> x(s.length);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / s.rate_hz;
    x[i] = offset + amp * std::sin(2.0 * std::numbers::pi * freq * t + phase) + sigma * g(rng);
  }
  return x;
}

inline std::uint64_t trial_seed(std::uint64_t base, std::size_t trial) {
  return base * 0x100000001b3ULL + 0x9e3779b97f4a7c15ULL * (trial + 1);
}

// ---------------------------------------------------------------------------
// Check harness
// ---------------------------------------------------------------------------

struct OracleCase {
  std::size_t trial = 0;
  std::uint64_t seed = 0;  // regenerate with random_window(seed, schema)
  std::size_t index = 0;   // position in the output vector
  double production = 0.0;
  double oracle = 0.0;
  double deviation = 0.0;
};

struct OracleReport {
  std::size_t trials = 0;
  std::size_t comparisons = 0;
  double max_deviation = 0.0;
  std::vector<OracleCase> failures;
  bool passed() const { return failures.empty(); }
};

/// |a - b| / max(|a|, |b|); 0 when both are 0, infinite on NaN or a length
/// disagreement.
inline double relative_deviation(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b) ? 0.0 : std::numeric_limits<double>::infinity();
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

/// Runs `trials` seeded windows through both functions
/// (span<const double> -> vector<double>) and records every output whose
/// relative deviation exceeds `tolerance`.
template <class Production, class Oracle>
OracleReport oracle_check(Production&& production, Oracle&& oracle, std::size_t trials, double tolerance,
                          const InputSchema& schema = {}, std::uint64_t seed = 1, std::size_t max_failures = 20) {
  OracleReport rep;
  rep.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t s = trial_seed(seed, t);
    const auto x = random_window(s, schema);
    const std::span<const double> view(x);
    const std::vector<double> a = production(view);
    const std::vector<double> b = oracle(view);
    const std::size_t n = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double pa = i < a.size() ? a[i] : std::numeric_limits<double>::quiet_NaN();
      const double pb = i < b.size() ? b[i] : std::numeric_limits<double>::quiet_NaN();
      const double d = (i < a.size() && i < b.size()) ? relative_deviation(pa, pb) : std::numeric_limits<double>::infinity();
      ++rep.comparisons;
      rep.max_deviation = std::max(rep.max_deviation, d);
      if (d > tolerance && rep.failures.size() < max_failures) rep.failures.push_back({t, s, i, pa, pb, d});
    }
  }
  return rep;
}

inline std::string describe(const OracleCase& c) {
  return "trial " + std::to_string(c.trial) + " seed " + std::to_string(c.seed) + " index " +
         std::to_string(c.index) + ": production " + std::to_string(c.production) + " oracle " +
         std::to_string(c.oracle) + " rel.dev " + std::to_string(c.deviation);
}

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

/// One-sided power by direct O(n^2) DFT, bins at k * rate / n. Uses exact
/// integer phase reduction so twiddles come from an n-entry table.
inline std::vector<double> dft_power(std::span<const double> x, bool hann, bool remove_mean) {
  const std::size_t n = x.size();
  double m = 0.0;
  if (remove_mean) {
    for (double v : x) m += v;
    m /= static_cast<double>(n);
  }
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = hann ? 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n))) : 1.0;
    y[i] = (x[i] - m) * w;
  }
  std::vector<double> c(n), s(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    c[j] = std::cos(a);
    s[j] = std::sin(a);
  }
  std::vector<double> p(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (k * i) % n;
      re += y[i] * c[j];
      im -= y[i] * s[j];
    }
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    p[k] = (re * re + im * im) / static_cast<double>(n) * (edge ? 1.0 : 2.0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

struct FeatureParams {
  double rate_hz = 2000.0;
  double zc_eps = 0.0;
  double ssc_eps = 0.0;
  double myop = 20.0;
  double wamp = 20.0;
  double hist_sigmas = 3.0;
  double fr_split_hz = 250.0;
  double psr_halfwidth_hz = 10.0;
};

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    std::swap(A[piv], A[col]);
    std::swap(b[piv], b[col]);
    if (A[col][col] == 0.0) return std::vector<double>(n, 0.0);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = A[r][col] / A[col][col];
      for (std::size_t k = col; k < n; ++k) A[r][k] -= f * A[col][k];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= A[i][k] * out[k];
    out[i] = acc / A[i][i];
  }
  return out;
}

/// AR(order) via the full Toeplitz Yule-Walker system.
inline std::vector<double> ar_toeplitz(std::span<const double> x, std::size_t order = 4) {
  const std::size_t n = x.size();
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(n);
  std::vector<double> r(order + 1, 0.0);
  for (std::size_t lag = 0; lag <= order; ++lag)
    for (std::size_t i = 0; i + lag < n; ++i) r[lag] += (x[i] - m) * (x[i + lag] - m);
  if (!(r[0] > 0.0)) return std::vector<double>(order, 0.0);
  std::vector<std::vector<double>> R(order, std::vector<double>(order));
  for (std::size_t i = 0; i < order; ++i)
    for (std::size_t j = 0; j < order; ++j) R[i][j] = r[i > j ? i - j : j - i];
  return gauss_solve(std::move(R), std::vector<double>(r.begin() + 1, r.end()));
}

inline double mav(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s / static_cast<double>(x.size());
}

inline double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

/// Two-pass sample variance.
inline double variance(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

/// All 34 values in table order (MYOP and WAMP included).
inline std::vector<double> features(std::span<const double> x, const FeatureParams& fp = {}) {
  const std::size_t n = x.size();
  const double N = static_cast<double>(n);
  std::vector<double> out;

  out.push_back(mav(x));
  const double var = variance(x);
  out.push_back(var);
  out.push_back(rms(x));

  double wl = 0.0, dsq = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    wl += std::abs(x[i] - x[i - 1]);
    dsq += (x[i] - x[i - 1]) * (x[i] - x[i - 1]);
  }
  out.push_back(wl);
  out.push_back(wl / (N - 1.0));
  out.push_back(std::sqrt(dsq / (N - 1.0)));

  int zc = 0, myop = 0, wamp = 0, ssc = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const bool opposite = (x[i - 1] > 0.0 && x[i] < 0.0) || (x[i - 1] < 0.0 && x[i] > 0.0);
    if (opposite && std::abs(x[i] - x[i - 1]) >= fp.zc_eps) ++zc;
    if (std::abs(x[i] - x[i - 1]) >= fp.wamp) ++wamp;
  }
  for (double v : x)
    if (std::abs(v) >= fp.myop) ++myop;
  for (std::size_t i = 1; i + 1 < n; ++i)
    if ((x[i] - x[i - 1]) * (x[i] - x[i + 1]) > fp.ssc_eps) ++ssc;
  out.push_back(zc);
  out.push_back(myop / N);
  out.push_back(wamp);
  out.push_back(ssc);

  // ten equal bins over mean +- k sigma, outliers folded into the end bins
  double m = 0.0;
  for (double v : x) m += v;
  m /= N;
  const double sd = std::sqrt(var);
  std::array<double, 10> hist{};
  if (sd > 0.0) {
    const double lo = m - fp.hist_sigmas * sd;
    const double width = 2.0 * fp.hist_sigmas * sd / 10.0;
    for (double v : x) {
      int b = 0;
      while (b < 9 && v >= lo + (b + 1) * width) ++b;
      hist[static_cast<std::size_t>(b)] += 1.0;
    }
  } else {
    hist[5] = N;
  }
  out.insert(out.end(), hist.begin(), hist.end());

  for (double a : ar_toeplitz(x, 4)) out.push_back(a);

  const auto p = dft_power(x, true, true);
  std::vector<double> f(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) f[k] = static_cast<double>(k) * fp.rate_hz / N;
  double total = 0.0;
  for (double v : p) total += v;
  if (!(total > 0.0)) {
    out.insert(out.end(), 10, 0.0);
    return out;
  }
  double m1 = 0.0, m2 = 0.0, m3 = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    m1 += f[k] * p[k];
    m2 += std::pow(f[k], 2) * p[k];
    m3 += std::pow(f[k], 3) * p[k];
  }
  const double mnf = m1 / total;
  std::size_t mdf = 0;
  while (mdf < p.size()) {
    double left = 0.0;
    for (std::size_t k = 0; k <= mdf; ++k) left += p[k];
    if (left >= total / 2.0) break;
    ++mdf;
  }
  const std::size_t pk = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  double low = 0.0, high = 0.0, near = 0.0, spread = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (f[k] <= fp.fr_split_hz) low += p[k];
    else high += p[k];
    if (std::abs(f[k] - f[pk]) <= fp.psr_halfwidth_hz) near += p[k];
    spread += (f[k] - mnf) * (f[k] - mnf) * p[k];
  }
  out.push_back(mnf);
  out.push_back(f[mdf]);
  out.push_back(f[pk]);
  out.push_back(total);
  out.push_back(m1);
  out.push_back(m2);
  out.push_back(m3);
  out.push_back(high > 0.0 ? low / high : 0.0);
  out.push_back(near / total);
  out.push_back(spread / total);
  return out;
}

// ---------------------------------------------------------------------------
// Signal quality metrics
// ---------------------------------------------------------------------------

inline double calibration_noise(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

inline double snr_db(std::span<const double> active, std::span<const double> rest) {
  return 10.0 * std::log10(std::pow(rms(active), 2) / std::pow(rms(rest), 2));
}

/// Rectangular window, no mean removal, inclusive band edges.
inline double smr_db(std::span<const double> x, double rate_hz, double signal_hz = 500.0, double motion_hz = 20.0) {
  const auto p = dft_power(x, false, false);
  double sig = 0.0, mot = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double f = static_cast<double>(k) * rate_hz / static_cast<double>(x.size());
    if (f <= signal_hz) sig += p[k];
    if (f <= motion_hz) mot += p[k];
  }
  if (!(mot > 0.0)) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(sig / mot);
}

// ---------------------------------------------------------------------------
// Cluster separation and statistics
// ---------------------------------------------------------------------------

/// Davies-Bouldin over row-major points; scatter = mean distance to centroid.
inline double davies_bouldin(const std::vector<std::vector<double>>& pts, const std::vector<int>& label) {
  std::vector<int> classes = label;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  const std::size_t d = pts.front().size();
  auto dist = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
  };
  std::vector<std::vector<double>> cen;
  std::vector<double> scatter;
  for (int c : classes) {
    std::vector<double> mu(d, 0.0);
    double cnt = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (label[i] == c) {
        for (std::size_t j = 0; j < d; ++j) mu[j] += pts[i][j];
        cnt += 1.0;
      }
    for (double& v : mu) v /= cnt;
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (label[i] == c) s += dist(pts[i], mu);
    cen.push_back(mu);
    scatter.push_back(s / cnt);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < cen.size(); ++i) {
    double worst = -1.0;
    for (std::size_t j = 0; j < cen.size(); ++j)
      if (i != j) worst = std::max(worst, (scatter[i] + scatter[j]) / dist(cen[i], cen[j]));
    sum += worst;
  }
  return sum / static_cast<double>(cen.size());
}

inline double cohens_d(std::span<const double> a, std::span<const double> b) {
  auto mean = [](std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  return (mean(a) - mean(b)) / std::sqrt((variance(a) + variance(b)) / 2.0);
}

/// Two-sided exact signed-rank p by enumerating all 2^n sign patterns of the
/// non-zero differences (mid-ranks for ties). Statistic is min(W+, W-).
inline double wilcoxon_enumerated_p(std::span<const double> a, std::span<const double> b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) below += 1.0;
      else if (std::abs(d[j]) == std::abs(d[i])) equal += 1.0;
    }
    rank[i] = below + (equal + 1.0) / 2.0;
  }
  double wp = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank[i];
    if (d[i] > 0.0) wp += rank[i];
  }
  const double w = std::min(wp, total - wp);
  std::uint64_t hits = 0;
  const std::uint64_t patterns = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1U) s += rank[i];
    if (std::min(s, total - s) <= w + 1e-9) ++hits;
  }
  return std::min(1.0, static_cast<double>(hits) / static_cast<double>(patterns));
}

}  // namespace hgr::oracle
