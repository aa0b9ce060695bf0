#include "helpers.hpp"

#include <hgr/synth/oracles.hpp>

#include <catch_amalgamated.hpp>

using namespace hgr;
using Catch::Approx;

namespace {

constexpr double kBin = 2000.0 / 600.0;

std::size_t at(Feature f) { return static_cast<std::size_t>(f); }

std::vector<double> all_features(std::span<const double> x, ChannelKind kind = ChannelKind::Emg,
                                 const ThresholdSpec& th = {}) {
  Periodogram engine;
  std::vector<double> out(features_for(kind).size());
  channel_features_into(x, 2000.0, kind, th, engine, out);
  return out;
}

std::vector<double> time_only(std::span<const double> x, const ThresholdSpec& th = {}) {
  std::vector<double> out(kNumFeatures);
  out.resize(time_features_into(x, th, true, out));
  return out;
}

Channel emg_channel(std::vector<double> x) { return {Placement::W1, ChannelKind::Emg, 2000.0, std::move(x)}; }

LabelTrack one_gesture(double start, double len) {
  LabelTrack t;
  t.segments.push_back({0.0, start, SegmentKind::Rest});
  t.segments.push_back({start, start + len, SegmentKind::Gesture, 3, 1});
  return t;
}

}  // namespace

TEST_CASE("feature table layout", "[features]") {
  CHECK(features_for(ChannelKind::Emg).size() == 34);
  CHECK(features_for(ChannelKind::GyroY).size() == 32);
  for (auto f : features_for(ChannelKind::MagX)) CHECK_FALSE(is_threshold_feature(f));
  for (std::size_t i = 0; i < kNumFeatures; ++i) CHECK(parse_feature(kFeatureNames[i]) == static_cast<Feature>(i));
}

TEST_CASE("segmentation", "[features]") {
  const auto ch = emg_channel(std::vector<double>(20000, 0.0));
  SECTION("2 s gesture gives 12 windows of 600 samples") {
    const auto w = segment(ch, one_gesture(1.0, 2.0), {});
    REQUIRE(w.size() == 12);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w[i].samples.size() == 600);
      CHECK(w[i].start_s == Approx(1.0 + 0.15 * static_cast<double>(i)));
      CHECK(w[i].gesture == 3);
      CHECK(w[i].repetition == 1);
    }
  }
  SECTION("shorter than one window gives none") { CHECK(segment(ch, one_gesture(1.0, 0.29), {}).empty()); }
  SECTION("labels past the channel end") {
    CHECK_THROWS_AS(segment(ch, one_gesture(9.0, 2.0), {}), Error);
  }
  SECTION("invalid spec") { CHECK_THROWS_AS(segment(ch, one_gesture(1.0, 2.0), {0.3, 0.0}), Error); }
}

TEST_CASE("time features by hand", "[features]") {
  const std::vector<double> x = {1, -1, 1, -1};
  const auto v = time_only(x);
  SECTION("alternating") {
    CHECK(v[at(Feature::MAV)] == Approx(1.0));
    CHECK(v[at(Feature::RMS)] == Approx(1.0));
    CHECK(v[at(Feature::WL)] == Approx(6.0));
    CHECK(v[at(Feature::DAMV)] == Approx(2.0));
    CHECK(v[at(Feature::DASDV)] == Approx(2.0));
    CHECK(v[at(Feature::ZC)] == 3.0);
    CHECK(v[at(Feature::SSC)] == 2.0);
    CHECK(v[at(Feature::VAR)] == Approx(4.0 / 3.0));
  }
  SECTION("constant") {
    const std::vector<double> c(600, -2.5);
    const auto w = all_features(c);
    CHECK(w[at(Feature::MAV)] == Approx(2.5));
    CHECK(w[at(Feature::VAR)] == 0.0);
    CHECK(w[at(Feature::WL)] == 0.0);
    CHECK(w[at(Feature::ZC)] == 0.0);
    CHECK(w[at(Feature::DASDV)] == 0.0);
    double hist = 0.0;
    for (std::size_t b = 0; b < kHistBins; ++b) hist += w[at(Feature::HIST0) + b];
    CHECK(hist == 600.0);
    for (std::size_t k = 0; k < kArOrder; ++k) CHECK(w[at(Feature::AR1) + k] == 0.0);
    // spectrum of a mean-removed constant is empty
    for (std::size_t f = at(Feature::MNF); f < kNumFeatures; ++f) CHECK(w[f] == 0.0);
    for (double value : w) CHECK(std::isfinite(value));
  }
  SECTION("threshold features") {
    const std::vector<double> y = {0, 30, 0, -25, 5, 10};
    const auto w = time_only(y);
    CHECK(w[at(Feature::MYOP)] == Approx(2.0 / 6.0));
    CHECK(w[at(Feature::WAMP)] == 4.0);  // diffs 30, -30, -25, 30, 5
    ThresholdSpec th;
    CHECK(w[at(Feature::ZC)] == 1.0);
    th.zc_eps = 31.0;
    CHECK(time_only(y, th)[at(Feature::ZC)] == 0.0);
  }
  SECTION("IMU rows skip MYOP and WAMP") {
    const auto n = testing::gaussian(600, 1.0, 3);
    const auto e = all_features(n, ChannelKind::Emg);
    const auto i = all_features(n, ChannelKind::AccelX);
    REQUIRE(i.size() == 32);
    CHECK(i[at(Feature::SSC) - 2] == e[at(Feature::SSC)]);
    CHECK(i.back() == e.back());
  }
}

TEST_CASE("frequency features", "[features]") {
  SECTION("single 100 Hz line") {
    const double A = 7.0;
    const auto x = testing::sine(100.0, 2000.0, 600, A, 0.3);
    const auto v = all_features(x);
    CHECK(v[at(Feature::MNF)] == Approx(100.0).margin(kBin));
    CHECK(v[at(Feature::MDF)] == Approx(100.0).margin(kBin));
    CHECK(v[at(Feature::PKF)] == Approx(100.0).margin(kBin));
    // Hann energy of a line: A^2/2 * sum(w^2) = A^2/2 * 3n/8
    CHECK(v[at(Feature::TTP)] == Approx(A * A / 2.0 * 3.0 * 600.0 / 8.0).epsilon(0.02));
    CHECK(v[at(Feature::PSR)] >= 0.95);
  }
  SECTION("two equal lines at 100 and 400 Hz") {
    auto x = testing::sine(100.0, 2000.0, 600);
    const auto y = testing::sine(400.0, 2000.0, 600, 1.0, 1.1);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
    const auto v = all_features(x);
    CHECK(v[at(Feature::FR)] == Approx(1.0).margin(0.05));
    CHECK(v[at(Feature::VCF)] == Approx(22500.0).margin(kBin * kBin));
    CHECK(v[at(Feature::MNF)] == Approx(250.0).margin(kBin));
  }
  SECTION("empty upper band reports FR 0") {
    const auto x = testing::sine(100.0, 2000.0, 600);
    ThresholdSpec th;
    th.fr_split_hz = 1000.0;
    CHECK(all_features(x, ChannelKind::Emg, th)[at(Feature::FR)] == 0.0);
  }
  SECTION("too short") { CHECK_THROWS_AS(all_features(std::vector<double>(5, 1.0)), Error); }
}

TEST_CASE("feature oracle equivalence", "[features]") {
  const auto rep = oracle::oracle_check([](std::span<const double> x) { return all_features(x); },
                                        [](std::span<const double> x) { return oracle::features(x); }, 200, 1e-9);
  for (const auto& f : rep.failures) UNSCOPED_INFO(kFeatureNames[f.index] << " " << oracle::describe(f));
  CHECK(rep.comparisons == 200 * 34);
  CHECK(rep.passed());
}

TEST_CASE("feature properties", "[features]") {
  SECTION("scale equivariance") {
    const double s = 3.7;
    for (std::uint64_t t = 0; t < 20; ++t) {
      const auto x = oracle::random_window(oracle::trial_seed(77, t));
      auto y = x;
      for (auto& v : y) v *= s;
      const auto a = all_features(x), b = all_features(y);
      for (auto f : {Feature::MAV, Feature::RMS, Feature::WL, Feature::DASDV})
        CHECK(b[at(f)] == Approx(s * a[at(f)]).epsilon(1e-9));
      for (auto f : {Feature::VAR, Feature::TTP})
        CHECK(b[at(f)] == Approx(s * s * a[at(f)]).epsilon(1e-9));
      for (auto f : {Feature::ZC, Feature::SSC, Feature::MDF, Feature::PKF})
        CHECK(b[at(f)] == a[at(f)]);
      for (auto f : {Feature::MNF, Feature::FR, Feature::PSR})
        CHECK(b[at(f)] == Approx(a[at(f)]).epsilon(1e-9));
    }
  }
  SECTION("Parseval on the tapered window") {
    for (std::uint64_t t = 0; t < 20; ++t) {
      const auto x = oracle::random_window(oracle::trial_seed(5, t));
      double mean = 0.0;
      for (double v : x) mean += v;
      mean /= static_cast<double>(x.size());
      double energy = 0.0;
      const auto n = static_cast<double>(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
        energy += std::pow(w * (x[i] - mean), 2);
      }
      CHECK(all_features(x)[at(Feature::TTP)] == Approx(energy).epsilon(1e-6));
    }
  }
  SECTION("AR(4) recovery") {
    const std::array<double, 4> a = {0.6, -0.3, 0.2, -0.15};
    const auto e = testing::gaussian(100000, 1.0, 17);
    std::vector<double> x(e.size(), 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
      x[n] = e[n];
      for (std::size_t k = 1; k <= 4 && k <= n; ++k) x[n] += a[k - 1] * x[n - k];
    }
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    const auto est = detail::ar_coefficients(x, mean);
    for (std::size_t k = 0; k < 4; ++k) CHECK(est[k] == Approx(a[k]).margin(0.05));
    const auto naive = oracle::ar_toeplitz(x);
    for (std::size_t k = 0; k < 4; ++k) CHECK(est[k] == Approx(naive[k]).epsilon(1e-9));
  }
  SECTION("variance matches two-pass oracle") {
    const auto x = testing::gaussian(600, 4.0, 8);
    CHECK(all_features(x)[at(Feature::VAR)] == Approx(oracle::variance(x)).epsilon(1e-12));
  }
}

TEST_CASE("feature matrix", "[features]") {
  SECTION("full default session: 816 x 2576") {
    const auto s = synth::gen_session(synth::SynthSpec::study_like(4), 0);
    const auto pre = dsp::preprocess_recording(s.recording, {}, {});
    const auto fm = extract_matrix(pre, s.truth, {}, {}, full_selection(pre));
    CHECK(fm.rows.size() == 816);
    CHECK(fm.cols.size() == 2576);
    CHECK(fm.data.rows() == 816);
    CHECK(fm.data.cols() == 2576);
    CHECK(fm.data.allFinite());
    CHECK(std::is_sorted(fm.cols.begin(), fm.cols.end()));
    CHECK(std::is_sorted(fm.rows.begin(), fm.rows.end()));
    std::map<int, int> per_class;
    for (int g : fm.labels()) ++per_class[g];
    CHECK(per_class.size() == 17);
    for (auto [g, n] : per_class) CHECK(n == 48);

    const auto one = fm.select({{Placement::F3, Modality::Emg}});
    CHECK(one.cols.size() == 34);
    CHECK(one.rows.size() == 816);
    const auto direct = extract_matrix(pre, s.truth, {}, {}, {{Placement::F3, Modality::Emg}});
    CHECK(direct.data == one.data);
    CHECK_THROWS_AS(fm.select({}), Error);
  }
  SECTION("empty selection") {
    Recording r;
    r.channels.push_back(emg_channel(std::vector<double>(8000, 0.0)));
    CHECK_THROWS_AS(extract_matrix(r, one_gesture(1.0, 2.0), {}, {}, {}), Error);
    CHECK_THROWS_AS(extract_matrix(r, one_gesture(1.0, 2.0), {}, {}, {{Placement::F1, Modality::Emg}}), Error);
  }
}
