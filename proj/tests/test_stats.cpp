#include "helpers.hpp"

#include <hgr/synth/oracles.hpp>

#include <catch_amalgamated.hpp>

using namespace hgr;
using Catch::Approx;

namespace {

std::vector<double> draws(std::size_t n, std::uint64_t seed, bool exponential) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::exponential_distribution<double> e(1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = exponential ? e(rng) : g(rng);
  return x;
}

stats::SampleGroup group(std::string label, std::vector<double> v) {
  std::vector<std::string> who;
  for (std::size_t i = 0; i < v.size(); ++i) who.push_back(synth::participant_id(static_cast<int>(i)));
  return {std::move(label), std::move(v), std::move(who)};
}

}  // namespace

TEST_CASE("Lilliefors", "[stats]") {
  SECTION("normal samples pass at roughly the nominal rate") {
    int pass = 0;
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s) pass += stats::lilliefors(draws(500, 1000 + s, false)) > 0.05;
    CHECK(pass >= static_cast<int>(0.93 * seeds));
  }
  SECTION("exponential samples fail") {
    for (int s = 0; s < 5; ++s) CHECK(stats::lilliefors(draws(500, 50 + s, true)) < 0.05);
  }
  SECTION("constant is degenerate") {
    const auto r = stats::lilliefors_test(std::vector<double>(10, 2.0));
    CHECK(r.degenerate);
    CHECK(r.p_value == 0.0);
  }
  SECTION("p in [0, 1], reproducible") {
    const auto x = draws(20, 3, false);
    const double p = stats::lilliefors(x);
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
    CHECK(stats::lilliefors(x) == p);
  }
  SECTION("too few samples") { CHECK_THROWS_AS(stats::lilliefors(std::vector<double>{1, 2, 3}), Error); }
}

TEST_CASE("t tests", "[stats]") {
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {2, 3, 4, 5, 6};
  const auto t = stats::t_test_independent(a, b);
  CHECK(t.statistic == Approx(-1.0));
  CHECK(t.df == Approx(8.0));
  CHECK(t.p_value == Approx(0.34659350708733416).epsilon(1e-9));
  const auto same = stats::t_test_independent(a, a);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == Approx(1.0));
  std::vector<double> far = a;
  for (auto& v : far) v = v * 0.01 + 100.0;
  std::vector<double> tight = a;
  for (auto& v : tight) v *= 0.01;
  CHECK(stats::t_test_independent(far, tight).p_value < 1e-6);
  CHECK_THROWS_AS(stats::t_test_independent(std::vector<double>(4, 1.0), std::vector<double>(4, 1.0)), Error);
  // paired variant on constant shifts is degenerate
  CHECK_THROWS_AS(stats::t_test_paired(a, b), Error);
}

TEST_CASE("Wilcoxon signed-rank", "[stats]") {
  SECTION("one differing pair") {
    const std::vector<double> a = {1, 2, 3, 4, 5}, b = {1, 2, 3, 4, 7};
    const auto w = stats::wilcoxon_signed_rank(a, b);
    CHECK(w.statistic == 0.0);
    CHECK(w.p_value == Approx(oracle::wilcoxon_enumerated_p(a, b)));
    CHECK(w.p_value == 1.0);
  }
  SECTION("antisymmetric differences") {
    const std::vector<double> a = {1, -1, 2, -2}, b = {0, 0, 0, 0};
    CHECK(stats::wilcoxon_signed_rank(a, b).p_value == Approx(1.0));
  }
  SECTION("all twelve above") {
    std::vector<double> a(12), b(12);
    for (int i = 0; i < 12; ++i) {
      a[static_cast<std::size_t>(i)] = 10.0 + i * 0.7;
      b[static_cast<std::size_t>(i)] = i * 0.3;
    }
    const auto w = stats::wilcoxon_signed_rank(a, b);
    CHECK(w.statistic == 0.0);
    CHECK(w.p_value == Approx(2.0 / 4096.0));
  }
  SECTION("exact path equals enumeration, with ties") {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> u(-4, 4);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 3 + static_cast<std::size_t>(trial % 10);
      std::vector<double> a(n), b(n, 0.0);
      for (auto& v : a) v = u(rng);
      if (std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; })) a[0] = 1.0;
      const double p = stats::wilcoxon_signed_rank(a, b).p_value;
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      CHECK(p == Approx(oracle::wilcoxon_enumerated_p(a, b)).epsilon(1e-12));
    }
  }
  SECTION("large n uses a normal approximation close to exact") {
    std::vector<double> d(30);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (i % 3 == 0 ? -1.0 : 1.0) * static_cast<double>(i + 1);
    const auto approx = stats::wilcoxon_signed_rank(d, std::vector<double>(30, 0.0));
    const auto ranks = stats::abs_midranks(d);
    CHECK(approx.p_value == Approx(stats::wilcoxon_exact_p(ranks, approx.statistic)).margin(0.01));
  }
  SECTION("errors") {
    CHECK_THROWS_AS(stats::wilcoxon_signed_rank(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
    CHECK_THROWS_AS(stats::wilcoxon_signed_rank(std::vector<double>{1, 2}, std::vector<double>{1}), Error);
  }
}

TEST_CASE("Cohen's d", "[stats]") {
  CHECK(stats::cohens_d(5.10, 1.66, 1.19, 1.07) == Approx(2.80).margin(0.01));
  CHECK(stats::cohens_d(35.78, 5.90, 12.96, 0.87) == Approx(5.41).margin(0.01));
  CHECK(stats::cohens_d(3.0, 1.0, 3.0, 2.0) == 0.0);
  CHECK_THROWS_AS(stats::cohens_d(1.0, 0.0, 2.0, 0.0), Error);

  const auto a = draws(12, 1, false), b = draws(12, 2, true);
  const double d = stats::cohens_d(a, b);
  CHECK(stats::cohens_d(b, a) == Approx(-d));
  auto a2 = a, b2 = b;
  for (auto& v : a2) v = 4.0 * v + 7.0;
  for (auto& v : b2) v = 4.0 * v + 7.0;
  CHECK(stats::cohens_d(a2, b2) == Approx(d).epsilon(1e-12));
  CHECK(d == Approx(oracle::cohens_d(a, b)).epsilon(1e-12));
}

TEST_CASE("hypothesis harness", "[stats]") {
  const auto emg = draws(12, 40, false);
  std::vector<double> low(12), high(12);
  for (std::size_t i = 0; i < 12; ++i) {
    low[i] = 0.41 + 0.05 * emg[i];
    high[i] = 0.74 + 0.05 * draws(12, 41, false)[i];
  }

  SECTION("identical groups") {
    const auto r = stats::compare_groups(group("emg", low), group("accel", low));
    CHECK(r.cohens_d == 0.0);
    CHECK_FALSE(r.reject);
  }
  SECTION("accel clearly ahead: H1 rejected with large d") {
    std::map<std::string, stats::SampleGroup> g = {{"emg", group("emg", low)},
                                                   {"accel", group("accel", high)},
                                                   {"gyro", group("gyro", low)},
                                                   {"mag", group("mag", high)},
                                                   {"imu_combined", group("imu_combined", high)}};
    const auto res = stats::run_hypotheses(g);
    REQUIRE(res.size() == 4);
    CHECK(res[0].id == "H1");
    CHECK(res[0].reject);
    CHECK(res[0].cohens_d < -3.0);
    CHECK_FALSE(res[1].reject);
    for (const auto& r : res) {
      CHECK(r.p_value >= 0.0);
      CHECK(r.p_value <= 1.0);
      const bool gate = r.normal_left && r.normal_right;
      CHECK((r.test_used == stats::TestUsed::TIndependent) == gate);
      CHECK((r.test_used == stats::TestUsed::WilcoxonSignedRank) == !gate);
    }
  }
  SECTION("non-normal group routes to Wilcoxon") {
    std::vector<double> skew = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.9};
    const auto r = stats::compare_groups(group("emg", skew), group("accel", high));
    CHECK_FALSE(r.normal_left);
    CHECK(r.test_used == stats::TestUsed::WilcoxonSignedRank);
  }
  SECTION("paired flag switches the t variant") {
    stats::StatsOptions opt;
    opt.paired = true;
    const auto r = stats::compare_groups(group("emg", low), group("accel", high), opt);
    if (r.normal_left && r.normal_right) CHECK(r.test_used == stats::TestUsed::TPaired);
  }
  SECTION("missing participant") {
    auto gyro = group("gyro", low);
    gyro.values.pop_back();
    gyro.participants.pop_back();
    std::map<std::string, stats::SampleGroup> g = {{"emg", group("emg", low)},
                                                   {"accel", group("accel", high)},
                                                   {"gyro", gyro},
                                                   {"mag", group("mag", high)},
                                                   {"imu_combined", group("imu_combined", high)}};
    CHECK_THROWS_AS(stats::run_hypotheses(g), Error);
    g.erase("mag");
    CHECK_THROWS_AS(stats::run_hypotheses(g), Error);
  }
  SECTION("three participants are too few") {
    const auto r = stats::compare_groups(group("emg", {1, 2, 3}), group("accel", {2, 3, 4}));
    CHECK(r.status == stats::TestStatus::TooFewSamples);
  }
}
