#include "helpers.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

using namespace hgr;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hgr_core_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

/// One EMG channel: unit noise, bursts of 40x during the gesture segments
/// of `sched` shifted by `delay_s`.
Recording burst_recording(const LabelTrack& sched, double total_s, double delay_s, std::uint64_t seed = 5) {
  const auto n = static_cast<std::size_t>(std::lround(total_s * kEmgRateHz));
  auto x = testing::gaussian(n, 1.0, seed);
  for (const auto& s : sched.gestures()) {
    const auto a = static_cast<std::size_t>(std::lround((s.start_s + delay_s) * kEmgRateHz));
    const auto b = std::min(n, static_cast<std::size_t>(std::lround((s.end_s + delay_s) * kEmgRateHz)));
    for (std::size_t i = a; i < b; ++i) x[i] *= 40.0;
  }
  Recording r;
  r.participant_id = "T";
  r.channels.push_back({Placement::W1, ChannelKind::Emg, kEmgRateHz, std::move(x)});
  return r;
}

ScheduleParams short_schedule() {
  ScheduleParams p;
  p.n_gestures = 3;
  p.calibration_s = 2.0;
  p.pre_gesture_rest_s = 2.0;
  return p;
}

}  // namespace

TEST_CASE("channel kinds, placements and gestures", "[core]") {
  CHECK(kAllChannelKinds.size() == 10);
  CHECK(kAllPlacements.size() == 8);
  CHECK(native_rate_hz(ChannelKind::Emg) == 2000.0);
  for (auto k : kImuKinds) CHECK(native_rate_hz(k) == 200.0);
  CHECK(modality_of(ChannelKind::AccelY) == Modality::Accel);
  CHECK(modality_of(ChannelKind::GyroZ) == Modality::Gyro);
  CHECK(modality_of(ChannelKind::MagX) == Modality::Mag);
  int wrist = 0;
  for (auto p : kAllPlacements) wrist += is_wrist(p);
  CHECK(wrist == 4);
  CHECK(kNumGestures == 17);
  CHECK(GestureId(0).name() == "TE");
  CHECK(GestureId(16).name() == "RD");
  CHECK_THROWS_AS(GestureId(17), Error);
  for (auto k : kAllChannelKinds) CHECK(parse_channel_kind(to_string(k)) == k);
  CHECK(parse_posture("180") == Posture::Deg180);
  CHECK_FALSE(parse_posture("45").has_value());
}

TEST_CASE("expected sample count", "[core]") {
  CHECK(expected_sample_count(2, 2, 4, 17, 20, 2000) == 10'880'000ULL);
  CHECK(expected_sample_count(1, 0, 1, 1, 1, 1) == 1ULL);
  CHECK(expected_sample_count(2, 2, 4, 17, 80, 2000) == 43'520'000ULL);
  CHECK_THROWS_AS(expected_sample_count(0, 2, 4, 17, 20, 2000), Error);
}

TEST_CASE("label schedule", "[core]") {
  const ScheduleParams p;
  const auto track = generate_label_schedule(p);
  const auto g = track.gestures();
  REQUIRE(g.size() == 68);
  for (const auto& s : g) CHECK(s.duration_s() == Approx(2.0));
  CHECK(track.segments.front().kind == SegmentKind::Calibration);
  CHECK(track.segments.front().duration_s() == Approx(15.0));
  CHECK(p.total_s() == Approx(372.0));

  SECTION("segments tile the cued span without overlap") {
    double t = 0.0, total = 0.0;
    for (const auto& s : track.segments) {
      CHECK(s.start_s == Approx(t).margin(1e-9));
      CHECK(s.end_s > s.start_s);
      t = s.end_s;
      total += s.duration_s();
    }
    CHECK(total == Approx(372.0));
    CHECK(t == Approx(372.0));
  }
  SECTION("each gesture appears in exactly four repetitions, in id order") {
    std::map<int, std::set<int>> reps;
    int last = -1;
    for (const auto& s : g) {
      CHECK(s.gesture >= last);
      last = s.gesture;
      reps[s.gesture].insert(s.repetition);
    }
    CHECK(reps.size() == 17);
    for (const auto& [id, r] : reps) CHECK(r == std::set<int>{0, 1, 2, 3});
  }
  SECTION("single gesture, single repetition") {
    ScheduleParams q;
    q.reps = 1;
    q.n_gestures = 1;
    CHECK(generate_label_schedule(q).gestures().size() == 1);
  }
  SECTION("invalid parameters") {
    ScheduleParams q;
    q.reps = 0;
    CHECK_THROWS_AS(generate_label_schedule(q), Error);
  }
}

TEST_CASE("label alignment", "[core]") {
  const auto p = short_schedule();
  const auto sched = generate_label_schedule(p);

  SECTION("bursts on cue give zero lag") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
      CHECK(align_labels_detailed(burst_recording(sched, p.total_s(), 0.0, seed), sched, 0.5).shift_samples == 0);
  }
  SECTION("0.25 s delay is recovered within one sample") {
    const auto rec = burst_recording(sched, p.total_s(), 0.25);
    const auto a = align_labels_detailed(rec, sched, 0.5);
    CHECK(std::abs(a.shift_samples - 500) <= 1);
    CHECK(a.track == sched.shifted(a.shift_s));
    SECTION("second pass is idempotent") {
      const auto again = align_labels_detailed(rec, a.track, 0.5);
      CHECK(std::abs(again.shift_samples) <= 1);
    }
  }
  SECTION("negative lag") {
    const auto rec = burst_recording(sched, p.total_s(), -0.1);
    CHECK(std::abs(align_labels_detailed(rec, sched, 0.5).shift_samples + 200) <= 1);
  }
  SECTION("max shift 0 returns the input") {
    const auto rec = burst_recording(sched, p.total_s(), 0.3);
    CHECK(align_labels(rec, sched, 0.0) == sched);
  }
  SECTION("no EMG channel") {
    Recording r;
    r.channels.push_back({Placement::W1, ChannelKind::AccelX, kImuRateHz, std::vector<double>(100, 0.0)});
    CHECK_THROWS_MATCHES(align_labels(r, sched, 0.5), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::NoEmgChannel; }));
  }
}

TEST_CASE("recording validation", "[core]") {
  Recording r;
  r.channels.push_back({Placement::W1, ChannelKind::Emg, 2000.0, std::vector<double>(2000, 0.0)});
  r.channels.push_back({Placement::W1, ChannelKind::AccelX, 200.0, std::vector<double>(200, 0.0)});
  CHECK_NOTHROW(r.validate());
  r.channels.push_back({Placement::W1, ChannelKind::Emg, 2000.0, std::vector<double>(2000, 0.0)});
  CHECK_THROWS_AS(r.validate(), Error);
  r.channels.pop_back();
  r.channels.push_back({Placement::W2, ChannelKind::Emg, 2000.0, std::vector<double>(3000, 0.0)});
  CHECK_THROWS_AS(r.validate(), Error);
}

TEST_CASE("session loading", "[core]") {
  const std::string schedule = R"("schedule": {"gesture_s": 2, "rest_s": 2, "reps": 4, "n_gestures": 17, "pre_gesture_rest_s": 5, "calibration_s": 15})";

  SECTION("minimal manifest with one EMG file") {
    const auto dir = scratch("minimal");
    std::string csv = "t_s,emg_uV\n";
    for (int i = 0; i < 2000; ++i) csv += std::to_string(i / 2000.0) + "," + std::to_string(i % 7) + "\n";
    write(dir / "W1_emg.csv", csv);
    write(dir / "manifest.json",
          R"({"participant_id": "P01", "posture": "90", "sensors": [{"placement": "W1", "emg_file": "W1_emg.csv"}], )" +
              schedule + "}");
    const auto rec = load_session(dir / "manifest.json");
    REQUIRE(rec.channels.size() == 1);
    CHECK(rec.channels[0].rate_hz == 2000.0);
    CHECK(rec.channels[0].samples.size() == 2000);
    CHECK(rec.channels[0].samples[8] == 1.0);

    SECTION("declared rate disagreeing with timestamps") {
      write(dir / "manifest.json",
            R"({"participant_id": "P01", "posture": "90", "rates": {"emg_hz": 200}, "sensors": [{"placement": "W1", "emg_file": "W1_emg.csv"}], )" +
                schedule + "}");
      CHECK_THROWS_MATCHES(load_session(dir / "manifest.json"), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::RateMismatch; }));
    }
    SECTION("duplicate placement") {
      write(dir / "manifest.json",
            R"({"participant_id": "P01", "posture": "90", "sensors": [{"placement": "W1", "emg_file": "W1_emg.csv"}, {"placement": "W1", "emg_file": "W1_emg.csv"}], )" +
                schedule + "}");
      CHECK_THROWS_MATCHES(load_session(dir / "manifest.json"), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::DuplicateChannel; }));
    }
    SECTION("missing file") {
      fs::remove(dir / "W1_emg.csv");
      CHECK_THROWS_MATCHES(load_session(dir / "manifest.json"), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::MissingFile; }));
    }
  }

  SECTION("combined per-unit file with empty IMU cells between ticks") {
    const auto dir = scratch("combined");
    std::string csv = "t_s,emg_uV,ax,ay,az,gx,gy,gz,mx,my,mz\n";
    for (int i = 0; i < 4000; ++i) {
      csv += std::to_string(i / 2000.0) + "," + std::to_string(i);
      if (i % 10 == 0)
        for (int a = 0; a < 9; ++a) csv += "," + std::to_string(a + i / 10);
      else
        csv += ",,,,,,,,,";
      csv += "\n";
    }
    write(dir / "F2.csv", csv);
    write(dir / "manifest.json",
          R"({"participant_id": "P02", "posture": "180", "sensors": [{"placement": "F2", "file": "F2.csv"}], )" + schedule + "}");
    const auto rec = load_session(dir / "manifest.json");
    CHECK(rec.posture == Posture::Deg180);
    REQUIRE(rec.channels.size() == 10);
    CHECK(rec.find(Placement::F2, ChannelKind::Emg)->samples.size() == 4000);
    const auto* mz = rec.find(Placement::F2, ChannelKind::MagZ);
    REQUIRE(mz != nullptr);
    CHECK(mz->samples.size() == 400);
    CHECK(mz->samples[3] == 11.0);
  }

  SECTION("save/load round trip of a full synthetic session") {
    auto spec = testing::small_spec(11, 2);
    const auto s = synth::gen_session(spec, 0);
    const auto dir = scratch("roundtrip");
    save_session(s.recording, s.schedule, dir);
    const auto back = load_session_full(dir / "manifest.json");
    CHECK(back.manifest.schedule.n_gestures == 2);
    const auto& rec = back.recording;
    REQUIRE(rec.channels.size() == 80);
    CHECK(rec.count(Modality::Emg) == 8);
    double worst = 0.0;
    for (const auto& c : s.recording.channels) {
      const auto* d = rec.find(c.placement, c.kind);
      REQUIRE(d != nullptr);
      REQUIRE(d->samples.size() == c.samples.size());
      CHECK(d->rate_hz == c.rate_hz);
      for (std::size_t i = 0; i < c.samples.size(); ++i)
        worst = std::max(worst, std::abs(d->samples[i] - c.samples[i]) / std::max(1e-12, std::abs(c.samples[i])));
    }
    CHECK(worst <= 1e-6);
  }
}
