#include "helpers.hpp"

#include <hgr/synth/oracles.hpp>

#include <catch_amalgamated.hpp>

using namespace hgr;
using Catch::Approx;

namespace {

const Channel& find(const Recording& r, Placement p, ChannelKind k) {
  for (const auto& c : r.channels)
    if (c.placement == p && c.kind == k) return c;
  throw std::runtime_error("channel missing");
}

// asymptotic two-sample Kolmogorov-Smirnov p-value
double ks_p(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  const double ne = static_cast<double>(a.size() * b.size()) / static_cast<double>(a.size() + b.size());
  const double lam = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double q = 0.0;
  for (int k = 1; k < 100; ++k) q += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  return std::clamp(q, 0.0, 1.0);
}

// mean of a channel over the middle of every truth segment of gesture g
std::vector<double> segment_means(const synth::SynthSession& s, Placement p, ChannelKind k, int g) {
  const auto& c = find(s.recording, p, k);
  std::vector<double> out;
  for (const auto& seg : s.truth.segments) {
    if (seg.kind != SegmentKind::Gesture || seg.gesture != g) continue;
    const auto a = static_cast<std::size_t>((seg.start_s + 0.5) * c.rate_hz);
    const auto b = static_cast<std::size_t>((seg.end_s - 0.5) * c.rate_hz);
    double m = 0.0;
    for (std::size_t i = a; i < b; ++i) m += c.samples[i];
    out.push_back(m / static_cast<double>(b - a));
  }
  return out;
}

std::vector<double> emg_time_row(std::span<const double> x) {
  std::vector<double> out(kNumFeatures);
  out.resize(time_features_into(x, ThresholdSpec{}, true, out));
  return out;
}

double lda_accuracy(const synth::SynthSpec& spec, int participant, pipeline::ModalitySet mod, const std::string& preset) {
  const auto s = synth::gen_session(spec, participant);
  pipeline::PipelineConfig cfg;
  const auto sf = pipeline::session_features(s.recording, s.schedule, cfg);
  const auto sub = sf.matrix.select(pipeline::selection(pipeline::find_preset(preset), mod));
  return classify::cv_evaluate(sub, cfg.plan, classify::Grid::single({.shrinkage = 0.1}), {.compute_dbi = false}).mean_accuracy;
}

}  // namespace

TEST_CASE("generation is deterministic per (spec, participant, posture)", "[synth]") {
  const auto spec = testing::small_spec(3, 2);
  const auto a = synth::gen_session(spec, 1);
  const auto b = synth::gen_session(spec, 1);
  REQUIRE(a.recording.channels.size() == 80);
  for (std::size_t i = 0; i < a.recording.channels.size(); ++i)
    CHECK(a.recording.channels[i].samples == b.recording.channels[i].samples);
  CHECK(a.reaction_delay_s == b.reaction_delay_s);

  // generating another participant first changes nothing
  (void)synth::gen_session(spec, 0);
  CHECK(synth::gen_session(spec, 1).recording.channels[5].samples == a.recording.channels[5].samples);

  const auto other = synth::gen_session(spec, 2);
  CHECK(other.recording.channels[0].samples != a.recording.channels[0].samples);
  const auto later = synth::gen_session(spec, 1, Posture::Deg180);
  CHECK(later.recording.channels[0].samples != a.recording.channels[0].samples);
  CHECK(later.recording.calibration_end_s == 0.0);

  auto reseeded = spec;
  reseeded.seed = 4;
  CHECK(synth::gen_session(reseeded, 1).recording.channels[0].samples != a.recording.channels[0].samples);
}

TEST_CASE("session layout", "[synth]") {
  const auto spec = testing::small_spec(5, 3);
  const auto s = synth::gen_session(spec, 0);
  const double total = s.schedule.total_s();
  for (const auto& c : s.recording.channels) {
    CHECK(c.rate_hz == native_rate_hz(c.kind));
    CHECK(c.samples.size() == static_cast<std::size_t>(std::llround(total * c.rate_hz)));
  }
  CHECK(s.reaction_delay_s >= spec.reaction_min_s);
  CHECK(s.reaction_delay_s <= spec.reaction_max_s);
  // truth spans are the cues shifted by roughly the reaction delay
  const auto cue = generate_label_schedule(s.schedule);
  REQUIRE(cue.segments.size() == s.truth.segments.size());
  for (std::size_t i = 0; i < cue.segments.size(); ++i) {
    if (cue.segments[i].kind != SegmentKind::Gesture) continue;
    const double shift = s.truth.segments[i].start_s - cue.segments[i].start_s;
    CHECK(std::abs(shift - s.reaction_delay_s) <= 2.0 * spec.reaction_jitter_s + 1e-12);
  }
  CHECK(synth::participant_id(0) == "P01");
  CHECK(synth::participant_id(11) == "P12");
}

TEST_CASE("calibration noise recovers the configured sigma", "[synth]") {
  const auto spec = synth::SynthSpec::study_like(8);
  const auto s = synth::gen_session(spec, 0);
  REQUIRE(s.schedule.calibration_s == 15.0);
  for (auto p : kAllPlacements) {
    const auto& c = find(s.recording, p, ChannelKind::Emg);
    const auto cal = std::span<const double>(c.samples).first(static_cast<std::size_t>(15.0 * kEmgRateHz));
    CHECK(quality::calibration_noise(cal) == Approx(spec.emg.noise_uV).epsilon(0.02));
  }
}

TEST_CASE("separability 0 makes gestures indistinguishable", "[synth]") {
  auto spec = testing::small_spec(9, 4);
  spec.separability = 0.0;
  const auto sig = synth::detail::make_signatures(spec, 2);
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t p = 0; p < 8; ++p) {
      CHECK(sig.emg_log_amp[g][p] == 0.0);
      CHECK(sig.osc_amp[g][p] == 0.0);
      for (std::size_t a = 0; a < 3; ++a) {
        CHECK(sig.accel[g][p][a] == 0.0);
        CHECK(sig.mag[g][p][a] == 0.0);
      }
    }

  // segment statistics pooled over participants and placements
  std::vector<double> acc0, acc3, emg0, emg3;
  for (int part = 0; part < 4; ++part) {
    const auto s = synth::gen_session(spec, part);
    for (auto p : kAllPlacements) {
      auto add = [](std::vector<double>& dst, const std::vector<double>& src) { dst.insert(dst.end(), src.begin(), src.end()); };
      add(acc0, segment_means(s, p, ChannelKind::AccelY, 0));
      add(acc3, segment_means(s, p, ChannelKind::AccelY, 3));
      const auto& c = find(s.recording, p, ChannelKind::Emg);
      for (const auto& seg : s.truth.segments) {
        if (seg.kind != SegmentKind::Gesture || (seg.gesture != 0 && seg.gesture != 3)) continue;
        const auto a = static_cast<std::size_t>((seg.start_s + 0.5) * kEmgRateHz);
        const double r = testing::rms(std::span<const double>(c.samples).subspan(a, 2000));
        (seg.gesture == 0 ? emg0 : emg3).push_back(std::log(r));
      }
    }
  }
  REQUIRE(acc0.size() == 128);
  CHECK(ks_p(acc0, acc3) > 0.01);
  CHECK(ks_p(emg0, emg3) > 0.01);
}

TEST_CASE("amplitudes are nonnegative and the spec validates", "[synth]") {
  const auto sig = synth::detail::make_signatures(synth::SynthSpec::study_like(2), 0);
  for (const auto& g : sig.osc_amp)
    for (double v : g) CHECK(v >= 0.0);
  auto bad = synth::SynthSpec::study_like();
  bad.separability = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = synth::SynthSpec::study_like();
  bad.emg.noise_uV = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("spec JSON round trip", "[synth]") {
  auto spec = synth::SynthSpec::study_like(77);
  spec.separability = 0.3;
  spec.imu.gyro_signature = 0.25;
  spec.schedule.n_gestures = 9;
  const auto back = synth::synth_spec_from_json(synth::to_json(spec));
  CHECK(synth::to_json(back) == synth::to_json(spec));
  CHECK(back.seed == 77);
  // absent keys keep defaults
  CHECK(synth::to_json(synth::synth_spec_from_json(nlohmann::json::object())) == synth::to_json(synth::SynthSpec{}));
}

TEST_CASE("oracle harness", "[synth]") {
  using oracle::oracle_check;
  auto mav = [](std::span<const double> x) { return std::vector<double>{emg_time_row(x)[static_cast<std::size_t>(Feature::MAV)]}; };
  SECTION("MAV agrees over 1000 windows") {
    const auto rep = oracle_check(mav, [](std::span<const double> x) { return std::vector<double>{oracle::mav(x)}; }, 1000, 1e-9);
    CHECK(rep.passed());
    CHECK(rep.max_deviation <= 1e-9);
    CHECK(rep.comparisons == 1000);
  }
  SECTION("an off-by-one RMS is caught, reproducibly") {
    auto broken = [](std::span<const double> x) {
      double s = 0.0;
      for (double v : x) s += v * v;
      return std::vector<double>{std::sqrt(s / static_cast<double>(x.size() - 1))};
    };
    auto ref = [](std::span<const double> x) { return std::vector<double>{oracle::rms(x)}; };
    const auto rep = oracle_check(broken, ref, 50, 1e-9);
    REQUIRE_FALSE(rep.passed());
    const auto& c = rep.failures.front();
    const auto x = oracle::random_window(c.seed);
    CHECK(broken(x)[0] == c.production);
    CHECK(ref(x)[0] == c.oracle);
    CHECK(c.deviation == Approx(1.0 - std::sqrt(599.0 / 600.0)).epsilon(1e-6));
    CHECK_FALSE(oracle::describe(c).empty());
  }
  SECTION("AR coefficients against a direct Toeplitz solve") {
    auto ar = [](std::span<const double> x) {
      const auto f = emg_time_row(x);
      const auto first = static_cast<std::size_t>(Feature::AR1);
      return std::vector<double>(f.begin() + first, f.begin() + first + 4);
    };
    const auto rep = oracle_check(ar, [](std::span<const double> x) { return oracle::ar_toeplitz(x, 4); }, 300, 1e-8);
    CHECK(rep.passed());
    CHECK(rep.comparisons == 1200);
  }
  SECTION("length disagreement is a failure") {
    const auto rep = oracle_check([](std::span<const double>) { return std::vector<double>{1.0}; },
                                  [](std::span<const double>) { return std::vector<double>{1.0, 2.0}; }, 3, 1e-9);
    CHECK(rep.failures.size() == 3);
  }
}

TEST_CASE("downstream accuracy tracks separability", "[synth][slow]") {
  const std::vector<double> levels = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> mean(levels.size(), 0.0);
  for (std::uint64_t seed = 1; seed <= 3; ++seed)
    for (std::size_t i = 0; i < levels.size(); ++i) {
      auto spec = testing::small_spec(seed, 6);
      spec.separability = levels[i];
      mean[i] += lda_accuracy(spec, 0, pipeline::ModalitySet::ImuCombined, "W1W2") / 3.0;
    }
  for (std::size_t i = 0; i < levels.size(); ++i) UNSCOPED_INFO("separability " << levels[i] << ": " << mean[i]);
  CHECK(mean.front() < 1.0 / 6.0 + 0.15);
  CHECK(mean.back() > 0.9);
  // estimated from 3 seeds, so equal levels can differ by sampling noise
  for (std::size_t i = 1; i < levels.size(); ++i) CHECK(mean[i] >= mean[i - 1] - 0.02);
}

TEST_CASE("study-like preset orders the modalities on every seed", "[synth][slow]") {
  using pipeline::ModalitySet;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto spec = synth::SynthSpec::study_like(seed);
    const auto s = synth::gen_session(spec, 0);
    pipeline::PipelineConfig cfg;
    const auto sf = pipeline::session_features(s.recording, s.schedule, cfg);
    std::map<ModalitySet, double> acc;
    for (auto m : pipeline::kAllModalitySets) {
      const auto sub = sf.matrix.select(pipeline::selection(pipeline::find_preset("W1-4F1-4"), m));
      acc[m] = classify::cv_evaluate(sub, cfg.plan, classify::Grid::single({.shrinkage = 0.1}), {.compute_dbi = false}).mean_accuracy;
    }
    INFO("seed " << seed << " emg " << acc[ModalitySet::Emg] << " accel " << acc[ModalitySet::Accel] << " gyro "
                 << acc[ModalitySet::Gyro] << " mag " << acc[ModalitySet::Mag]);
    CHECK(acc[ModalitySet::Accel] > acc[ModalitySet::Emg]);
    CHECK(acc[ModalitySet::Emg] > acc[ModalitySet::Gyro]);
    CHECK(acc[ModalitySet::Mag] > acc[ModalitySet::Emg]);
  }
}
