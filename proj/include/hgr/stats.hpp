#pragma once

#include <hgr/error.hpp>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hgr::stats {

struct SampleGroup {
  std::string label;
  std::vector<double> values;             // one value per participant
  std::vector<std::string> participants;  // optional, parallel to values
};

inline double mean(std::span<const double> v) {
  if (v.empty()) fail(ErrorCode::TooFewSamples, "mean of empty sequence");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1). Zero for fewer than two values.
inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// ---------------------------------------------------------------------------
// Lilliefors normality test
// ---------------------------------------------------------------------------

/// Kolmogorov-Smirnov distance to a normal with the sample's mean and
/// (n - 1) standard deviation. Requires non-zero spread.
inline double ks_normal_statistic(std::span<const double> values) {
  std::vector<double> z(values.begin(), values.end());
  const double m = mean(z);
  const double s = sample_std(z);
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = normal_cdf((z[i] - m) / s);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

struct LillieforsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // zero variance: p forced to 0
};

inline constexpr std::size_t kLillieforsSimulations = 10000;
inline constexpr std::uint64_t kLillieforsSeed = 0x4c696c6c6965ULL;

namespace detail {

/// Sorted Monte-Carlo null distribution of the KS distance for sample size n.
/// Computed once per (n, simulations, seed) and shared; thread-safe.
inline std::shared_ptr<const std::vector<double>> lilliefors_null(std::size_t n, std::size_t sims,
                                                                  std::uint64_t seed) {
  static std::mutex mutex;
  static std::map<std::array<std::uint64_t, 3>, std::shared_ptr<const std::vector<double>>> cache;
  const std::array<std::uint64_t, 3> key{n, sims, seed};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (n + 1)));
  std::normal_distribution<double> normal;
  auto dist = std::make_shared<std::vector<double>>(sims);
  std::vector<double> draw(n);
  for (auto& d : *dist) {
    for (auto& x : draw) x = normal(rng);
    d = ks_normal_statistic(draw);
  }
  std::sort(dist->begin(), dist->end());
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(dist)).first->second;
}

}  // namespace detail

/// Lilliefors test with a seeded Monte-Carlo null distribution;
/// p = (1 + #{simulated >= observed}) / (1 + simulations).
inline LillieforsResult lilliefors_test(std::span<const double> values,
                                        std::size_t simulations = kLillieforsSimulations,
                                        std::uint64_t seed = kLillieforsSeed) {
  if (values.size() < 4) fail(ErrorCode::TooFewSamples, "Lilliefors test needs n >= 4");
  for (double v : values)
    if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "non-finite value in sample");
  if (sample_std(values) == 0.0) return {0.0, 0.0, true};
  const double d = ks_normal_statistic(values);
  const auto null = detail::lilliefors_null(values.size(), simulations, seed);
  // ties with the observed value count as "at least as extreme"
  const auto above = static_cast<double>(null->end() - std::lower_bound(null->begin(), null->end(), d - 1e-15));
  return {d, (1.0 + above) / (1.0 + static_cast<double>(simulations)), false};
}

inline double lilliefors(std::span<const double> values) { return lilliefors_test(values).p_value; }

// ---------------------------------------------------------------------------
// Location tests
// ---------------------------------------------------------------------------

struct TestStat {
  double statistic = 0.0;
  double p_value = 1.0;
  double df = 0.0;
};

inline double two_sided_t_p(double t, double df) {
  if (t == 0.0) return 1.0;
  boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

/// Two-sided Welch t-test (unequal variances).
inline TestStat t_test_independent(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) fail(ErrorCode::TooFewSamples, "t-test needs n >= 2 per group");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = std::pow(sample_std(a), 2) / na;
  const double vb = std::pow(sample_std(b), 2) / nb;
  if (va + vb == 0.0) fail(ErrorCode::ZeroVariance, "both groups have zero variance");
  const double t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  return {t, two_sided_t_p(t, df), df};
}

/// Two-sided paired t-test on a - b.
inline TestStat t_test_paired(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::LengthMismatch, "paired t-test needs equal lengths");
  if (a.size() < 2) fail(ErrorCode::TooFewSamples, "paired t-test needs n >= 2");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double s = sample_std(d);
  if (s == 0.0) fail(ErrorCode::ZeroVariance, "differences have zero variance");
  const double n = static_cast<double>(d.size());
  const double t = mean(d) / (s / std::sqrt(n));
  return {t, two_sided_t_p(t, n - 1.0), n - 1.0};
}

inline constexpr std::size_t kWilcoxonExactMax = 25;

/// Mid-ranks of |d| (1-based), ties averaged.
inline std::vector<double> abs_midranks(std::span<const double> d) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return std::abs(d[i]) < std::abs(d[j]); });
  std::vector<double> rank(d.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

/// Exact two-sided p for statistic W = min(W+, W-) given the (mid-)ranks,
/// by counting sign assignments over doubled integer ranks.
inline double wilcoxon_exact_p(std::span<const double> ranks, double w) {
  std::vector<int> r2;
  int total = 0;
  for (double r : ranks) {
    r2.push_back(static_cast<int>(std::lround(2.0 * r)));
    total += r2.back();
  }
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  int reach = 0;
  for (int v : r2) {
    for (int s = reach; s >= 0; --s)
      if (count[static_cast<std::size_t>(s)] != 0.0) count[static_cast<std::size_t>(s + v)] += count[static_cast<std::size_t>(s)];
    reach += v;
  }
  const auto limit = static_cast<std::size_t>(std::lround(2.0 * w));
  double below = 0.0;
  for (std::size_t s = 0; s <= limit && s < count.size(); ++s) below += count[s];
  return std::min(1.0, 2.0 * below / std::ldexp(1.0, static_cast<int>(ranks.size())));
}

/// Paired Wilcoxon signed-rank test on a - b. Zero differences are dropped;
/// exact p up to 25 non-zero pairs, normal approximation with continuity
/// and tie correction beyond.
inline TestStat wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::LengthMismatch, "Wilcoxon needs paired samples");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  if (d.empty()) fail(ErrorCode::AllZeroDifferences, "all paired differences are zero");
  const auto rank = abs_midranks(d);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0.0 ? w_plus : w_minus) += rank[i];
  const double w = std::min(w_plus, w_minus);
  if (d.size() <= kWilcoxonExactMax) return {w, wilcoxon_exact_p(rank, w), 0.0};

  const double n = static_cast<double>(d.size());
  double tie_term = 0.0;
  std::vector<double> sorted = rank;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double mu = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  const double z = std::min(0.0, w - mu + 0.5) / std::sqrt(var);
  return {w, std::clamp(2.0 * normal_cdf(z), 0.0, 1.0), 0.0};
}

// ---------------------------------------------------------------------------
// Effect size
// ---------------------------------------------------------------------------

/// Equal-n pooled form: (a_mean - b_mean) / sqrt((a_std^2 + b_std^2) / 2).
inline double cohens_d(double a_mean, double a_std, double b_mean, double b_std) {
  if (a_std < 0.0 || b_std < 0.0) fail(ErrorCode::InvalidArgument, "standard deviations must be >= 0");
  const double pooled = std::sqrt((a_std * a_std + b_std * b_std) / 2.0);
  if (pooled == 0.0) fail(ErrorCode::ZeroPooledStd, "both standard deviations are zero");
  return (a_mean - b_mean) / pooled;
}

inline double cohens_d(std::span<const double> a, std::span<const double> b) {
  return cohens_d(mean(a), sample_std(a), mean(b), sample_std(b));
}

// ---------------------------------------------------------------------------
// Hypothesis harness
// ---------------------------------------------------------------------------

enum class Hypothesis { H1, H2, H3, H4 };

constexpr std::string_view to_string(Hypothesis h) {
  constexpr std::array<std::string_view, 4> names = {"H1", "H2", "H3", "H4"};
  return names[static_cast<std::size_t>(h)];
}

/// Right-hand group key of each hypothesis (left is always "emg").
constexpr std::string_view hypothesis_right(Hypothesis h) {
  constexpr std::array<std::string_view, 4> names = {"accel", "gyro", "mag", "imu_combined"};
  return names[static_cast<std::size_t>(h)];
}

inline constexpr std::array<Hypothesis, 4> kAllHypotheses = {Hypothesis::H1, Hypothesis::H2,
                                                            Hypothesis::H3, Hypothesis::H4};

enum class TestUsed { None, TIndependent, TPaired, WilcoxonSignedRank };

constexpr std::string_view to_string(TestUsed t) {
  switch (t) {
    case TestUsed::TIndependent: return "t_independent";
    case TestUsed::TPaired: return "t_paired";
    case TestUsed::WilcoxonSignedRank: return "wilcoxon_signed_rank";
    default: return "none";
  }
}

enum class TestStatus { Ok, TooFewSamples, Degenerate };

constexpr std::string_view to_string(TestStatus s) {
  switch (s) {
    case TestStatus::Ok: return "ok";
    case TestStatus::TooFewSamples: return "TooFewSamples";
    default: return "Degenerate";
  }
}

struct StatsOptions {
  double alpha = 0.05;
  double normality_alpha = 0.05;
  bool paired = false;  // t-test variant when both groups pass the normality gate
};

/// Outcome of testing "left >= right". `cohens_d` is signed left - right;
/// the claim is rejected when p < alpha and the left mean is lower.
struct TestResult {
  std::string id;
  std::string left;
  std::string right;
  double mean_left = 0.0, std_left = 0.0;
  double mean_right = 0.0, std_right = 0.0;
  double normality_p_left = 0.0, normality_p_right = 0.0;
  bool normal_left = false;
  bool normal_right = false;
  TestUsed test_used = TestUsed::None;
  double statistic = 0.0;
  double p_value = 1.0;
  double cohens_d = 0.0;
  bool reject = false;
  TestStatus status = TestStatus::Ok;

  bool significant(double alpha) const { return status == TestStatus::Ok && p_value < alpha; }
};

/// Normality-gated comparison of two per-participant groups.
inline TestResult compare_groups(const SampleGroup& left, const SampleGroup& right,
                                 const StatsOptions& opt = {}) {
  TestResult r;
  r.left = left.label;
  r.right = right.label;
  if (left.values.size() != right.values.size())
    fail(ErrorCode::ParticipantMismatch, left.label + " vs " + right.label + ": group sizes differ");
  if (!left.participants.empty() && !right.participants.empty() && left.participants != right.participants)
    fail(ErrorCode::ParticipantMismatch, left.label + " vs " + right.label + ": participant order differs");
  if (left.values.empty()) {
    r.status = TestStatus::TooFewSamples;
    return r;
  }
  r.mean_left = mean(left.values);
  r.std_left = sample_std(left.values);
  r.mean_right = mean(right.values);
  r.std_right = sample_std(right.values);
  const double pooled = std::sqrt((r.std_left * r.std_left + r.std_right * r.std_right) / 2.0);
  r.cohens_d = pooled > 0.0 ? (r.mean_left - r.mean_right) / pooled
               : r.mean_left == r.mean_right ? 0.0
                                              : std::copysign(std::numeric_limits<double>::infinity(),
                                                              r.mean_left - r.mean_right);
  if (left.values.size() < 4) {
    r.status = TestStatus::TooFewSamples;
    return r;
  }

  const auto nl = lilliefors_test(left.values);
  const auto nr = lilliefors_test(right.values);
  r.normality_p_left = nl.p_value;
  r.normality_p_right = nr.p_value;
  r.normal_left = nl.p_value > opt.normality_alpha;
  r.normal_right = nr.p_value > opt.normality_alpha;
  try {
    TestStat t;
    if (r.normal_left && r.normal_right) {
      r.test_used = opt.paired ? TestUsed::TPaired : TestUsed::TIndependent;
      t = opt.paired ? t_test_paired(left.values, right.values)
                     : t_test_independent(left.values, right.values);
    } else {
      r.test_used = TestUsed::WilcoxonSignedRank;
      t = wilcoxon_signed_rank(left.values, right.values);
    }
    r.statistic = t.statistic;
    r.p_value = t.p_value;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroVariance && e.code() != ErrorCode::AllZeroDifferences) throw;
    r.status = TestStatus::Degenerate;
    r.p_value = r.mean_left == r.mean_right ? 1.0 : 0.0;
  }
  r.reject = r.p_value < opt.alpha && r.mean_left < r.mean_right;
  return r;
}

/// H1..H4: emg >= accel, gyro, mag, imu_combined.
inline std::vector<TestResult> run_hypotheses(const std::map<std::string, SampleGroup>& groups,
                                              const StatsOptions& opt = {}) {
  auto get = [&](std::string_view key) -> const SampleGroup& {
    auto it = groups.find(std::string(key));
    if (it == groups.end()) fail(ErrorCode::ParticipantMismatch, "missing group '" + std::string(key) + "'");
    return it->second;
  };
  const SampleGroup& emg = get("emg");
  std::vector<TestResult> out;
  for (auto h : kAllHypotheses) {
    auto r = compare_groups(emg, get(hypothesis_right(h)), opt);
    r.id = std::string(to_string(h));
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json to_json(const TestResult& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"id", r.id},
          {"left", r.left},
          {"right", r.right},
          {"mean_left", num(r.mean_left)},
          {"std_left", num(r.std_left)},
          {"mean_right", num(r.mean_right)},
          {"std_right", num(r.std_right)},
          {"normality_p_left", num(r.normality_p_left)},
          {"normality_p_right", num(r.normality_p_right)},
          {"normal_left", r.normal_left},
          {"normal_right", r.normal_right},
          {"test_used", std::string(to_string(r.test_used))},
          {"statistic", num(r.statistic)},
          {"p_value", num(r.p_value)},
          {"cohens_d", num(r.cohens_d)},
          {"decision", r.reject ? "reject" : "fail_to_reject"},
          {"status", std::string(to_string(r.status))}};
}

}  // namespace hgr::stats
