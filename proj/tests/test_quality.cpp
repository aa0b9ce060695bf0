#include "helpers.hpp"

#include <hgr/synth/oracles.hpp>

#include <catch_amalgamated.hpp>

using namespace hgr;
using Catch::Approx;

namespace {

// sin(100 Hz) + 0.3 sin(10 Hz): whole periods in every 1 s span, so RMS
// ratios between spans are exact amplitude ratios
double wave(double t) {
  return std::sin(2.0 * std::numbers::pi * 100.0 * t) + 0.3 * std::sin(2.0 * std::numbers::pi * 10.0 * t);
}

LabelTrack fixture_labels(int gestures) {
  LabelTrack t;
  t.segments.push_back({0.0, 2.0, SegmentKind::Calibration});
  double at = 2.0;
  for (int g = 0; g < gestures; ++g) {
    t.segments.push_back({at, at + 2.0, SegmentKind::Gesture, g, 0});
    t.segments.push_back({at + 2.0, at + 4.0, SegmentKind::Rest});
    at += 4.0;
  }
  return t;
}

Channel scaled(Placement p, ChannelKind k, const LabelTrack& labels, double gain) {
  const double end = labels.segments.back().end_s;
  const auto n = static_cast<std::size_t>(std::lround(end * 2000.0));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / 2000.0;
    double a = 1.0;
    for (const auto& s : labels.segments)
      if (s.kind == SegmentKind::Gesture && t >= s.start_s && t < s.end_s) a = gain;
    x[i] = a * wave(t);
  }
  return {p, k, 2000.0, std::move(x)};
}

Recording fixture(const std::string& id, const LabelTrack& labels, std::vector<double> emg_gains, double imu_gain) {
  Recording r;
  r.participant_id = id;
  r.calibration_end_s = 2.0;
  for (std::size_t i = 0; i < emg_gains.size(); ++i)
    r.channels.push_back(scaled(kAllPlacements[i], ChannelKind::Emg, labels, emg_gains[i]));
  r.channels.push_back(scaled(Placement::W1, ChannelKind::AccelX, labels, imu_gain));
  return r;
}

}  // namespace

TEST_CASE("calibration noise", "[quality]") {
  CHECK(quality::calibration_noise(std::vector<double>(100, 4.2)) == 0.0);
  CHECK(quality::calibration_noise(std::vector<double>{-1.0, 1.0}) == Approx(1.0));
  const auto g = testing::gaussian(30000, 5.0, 21);
  CHECK(quality::calibration_noise(g) == Approx(5.0).margin(0.1));
  auto shifted = g;
  for (auto& v : shifted) v += 1234.5;
  CHECK(quality::calibration_noise(shifted) == Approx(quality::calibration_noise(g)).epsilon(1e-9));
  CHECK(quality::calibration_noise(g) == Approx(oracle::calibration_noise(g)).epsilon(1e-12));
  CHECK_THROWS_AS(quality::calibration_noise(std::vector<double>{1.0}), Error);
}

TEST_CASE("IMU sensor noise", "[quality]") {
  CHECK(quality::imu_sensor_noise(std::vector<double>{1, 1, 1}) == 1.0);
  CHECK(quality::imu_sensor_noise(std::vector<double>{0, 0, 3}) == 1.0);
  CHECK(quality::imu_sensor_noise(std::vector<double>{2, 3, 4}) == 3.0);
  CHECK_THROWS_AS(quality::imu_sensor_noise(std::vector<double>{1, 2}), Error);
}

TEST_CASE("SNR", "[quality]") {
  const auto x = testing::gaussian(2000, 3.0, 2);
  CHECK(quality::snr(x, x) == 0.0);
  auto y = x;
  for (auto& v : y) v *= 10.0;
  CHECK(quality::snr(y, x) == Approx(20.0));
  const auto act = testing::sine(50.0, 2000.0, 4000, 5.0);
  const auto rest = testing::gaussian(4000, 0.5, 3);
  CHECK(quality::snr(act, rest) == Approx(16.99).margin(0.2));
  CHECK(quality::snr(act, rest) == Approx(oracle::snr_db(act, rest)).epsilon(1e-12));
  CHECK_THROWS_AS(quality::snr(act, std::vector<double>(10, 0.0)), Error);
}

TEST_CASE("SMR", "[quality]") {
  const std::size_t n = 2000;  // 1 Hz bins
  SECTION("all power at 10 Hz") { CHECK(quality::smr(testing::sine(10.0, 2000.0, n), 2000.0) == Approx(0.0).margin(1e-9)); }
  SECTION("equal lines at 10 and 100 Hz") {
    auto x = testing::sine(10.0, 2000.0, n);
    const auto y = testing::sine(100.0, 2000.0, n);
    for (std::size_t i = 0; i < n; ++i) x[i] += y[i];
    CHECK(quality::smr(x, 2000.0) == Approx(10.0 * std::log10(2.0)).margin(1e-6));
  }
  SECTION("300 Hz line with a 1% power line at 10 Hz") {
    auto x = testing::sine(300.0, 2000.0, n);
    const auto y = testing::sine(10.0, 2000.0, n, 0.1);
    for (std::size_t i = 0; i < n; ++i) x[i] += y[i];
    CHECK(quality::smr(x, 2000.0) == Approx(10.0 * std::log10(1.01 / 0.01)).margin(1e-6));
  }
  SECTION("never negative, agrees with the DFT oracle") {
    for (std::uint64_t t = 0; t < 30; ++t) {
      const auto x = oracle::random_window(oracle::trial_seed(9, t));
      const double v = quality::smr(x, 2000.0);
      CHECK(v >= 0.0);
      CHECK(oracle::relative_deviation(v, oracle::smr_db(x, 2000.0)) <= 1e-9);
    }
  }
  SECTION("empty motion band is +inf") {
    CHECK(quality::smr(std::vector<double>(n, 0.0), 2000.0) == std::numeric_limits<double>::infinity());
  }
  SECTION("rate too low") { CHECK_THROWS_AS(quality::smr(std::vector<double>(100, 1.0), 200.0), Error); }
}

TEST_CASE("noise report on a synthetic session", "[quality]") {
  auto spec = testing::small_spec(6, 1);
  const auto s = synth::gen_session(spec, 0);
  const auto rep = quality::noise_report(s.recording);
  CHECK(rep.channels.size() == 80);
  CHECK(rep.sensors.size() == 32);
  CHECK(rep.modalities.at(Modality::Emg).n == 8);
  CHECK(rep.modalities.at(Modality::Emg).mean == Approx(spec.emg.noise_uV).epsilon(0.03));
  CHECK(rep.modalities.at(Modality::Gyro).mean == Approx(spec.imu.gyro_noise).epsilon(0.05));
  for (const auto& c : rep.channels) CHECK(c.sigma >= 0.0);

  const auto later = synth::gen_session(spec, 0, Posture::Deg180);
  CHECK_THROWS_AS(quality::noise_report(later.recording), Error);
}

TEST_CASE("gesture quality table", "[quality]") {
  SECTION("one participant, one channel per group: table equals channel values") {
    const auto labels = fixture_labels(2);
    const std::vector<Recording> recs = {fixture("P01", labels, {10.0}, 2.0)};
    const std::vector<LabelTrack> tracks = {labels};
    const auto t = quality::gesture_quality_table(recs, tracks);
    REQUIRE(t.rows.size() == 2);
    for (const auto& r : t.rows) {
      CHECK(r.snr_emg.mean == Approx(20.0).epsilon(1e-9));
      CHECK(r.snr_imu.mean == Approx(20.0 * std::log10(2.0)).epsilon(1e-6));
      CHECK(r.smr_emg.mean >= 0.0);
      CHECK(r.snr_emg.n == 1);
    }
  }
  SECTION("channels are averaged before participants") {
    const auto labels = fixture_labels(1);
    const std::vector<Recording> recs = {fixture("P01", labels, {10.0}, 2.0),
                                         fixture("P02", labels, {100.0, 100.0, 100.0}, 2.0)};
    const std::vector<LabelTrack> tracks = {labels, labels};
    const auto t = quality::gesture_quality_table(recs, tracks);
    // per participant 20 and 40 dB; pooling the four channels would give 35
    CHECK(t.rows[0].snr_emg.mean == Approx(30.0).epsilon(1e-9));
  }
  SECTION("EMG bursts 10x, IMU 2x: EMG SNR wins for every gesture") {
    const auto labels = fixture_labels(17);
    std::vector<Recording> recs;
    std::vector<LabelTrack> tracks;
    for (int p = 0; p < 4; ++p) {
      recs.push_back(fixture(synth::participant_id(p), labels, {10.0 + p, 9.0}, 2.0 + 0.1 * p));
      tracks.push_back(labels);
    }
    const auto t = quality::gesture_quality_table(recs, tracks);
    REQUIRE(t.rows.size() == 17);
    for (const auto& r : t.rows) CHECK(r.snr_emg.mean > r.snr_imu.mean);
    const auto csv = quality::quality_csv(t);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 18);
  }
  SECTION("participants must cover the same gestures") {
    const std::vector<quality::ParticipantQuality> parts = {
        quality::participant_quality(fixture("P01", fixture_labels(2), {10.0}, 2.0), fixture_labels(2)),
        quality::participant_quality(fixture("P02", fixture_labels(1), {10.0}, 2.0), fixture_labels(1))};
    CHECK_THROWS_AS(quality::aggregate_quality(parts), Error);
  }
}

TEST_CASE("effect sizes from published group statistics", "[quality]") {
  CHECK(stats::cohens_d(5.10, 1.66, 1.19, 1.07) == Approx(2.80).margin(0.01));
  CHECK(stats::cohens_d(35.78, 5.90, 12.96, 0.87) == Approx(5.41).margin(0.01));
}
