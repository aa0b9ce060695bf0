#pragma once

#include <hgr/core.hpp>
#include <hgr/dsp.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace hgr::synth {

// Counter-based substreams: every (seed, tag, indices...) path gets its own
// mt19937_64 state, so generation order never matters.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(seed);
  for (auto v : path) s = splitmix64(s ^ splitmix64(v + 0x632be59bd9b4e019ULL));
  return s;
}

inline std::mt19937_64 stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return std::mt19937_64(derive_seed(seed, path));
}

enum Tag : std::uint64_t { kSignature = 1, kParticipant, kChannel, kEvents, kBurst };

struct EmgModel {
  double noise_uV = 5.0;        // baseline sigma
  double burst_uV = 60.0;       // mean burst RMS before filtering
  double spread = 0.50;         // log-amplitude spread of the per-(gesture, placement) signature
  double rep_jitter = 0.20;     // log-sigma, shared by all channels of a repetition
  double channel_jitter = 0.20; // log-sigma, per channel and repetition
  double band_lo_hz = 20.0;
  double band_hi_hz = 450.0;
};

struct ImuModel {
  double gravity = 9.81;          // m/s^2
  double accel_noise = 0.03;
  double accel_offset = 1.0;      // signature scale of the DC shift per axis
  double accel_rep_jitter = 0.70; // per repetition and axis
  double accel_osc = 0.15;        // micro-oscillation amplitude scale
  double field_uT = 48.0;
  double mag_noise = 0.4;
  double mag_offset = 4.0;
  double mag_rep_jitter = 2.0;
  double gyro_noise = 0.6;        // deg/s
  double gyro_signature = 0.0;    // rotational content per gesture; 0 = uninformative
};

struct SynthSpec {
  std::uint64_t seed = 1;
  int n_participants = 12;
  ScheduleParams schedule;
  double separability = 1.0;
  EmgModel emg;
  ImuModel imu;
  double reaction_min_s = 0.10;
  double reaction_max_s = 0.20;
  double reaction_jitter_s = 0.02;  // per repetition
  double ramp_s = 0.10;
  double participant_variability = 0.15;  // log-sigma of per-participant jitter scaling
  bool calibration_first_posture_only = true;

  void validate() const {
    schedule.validate();
    if (n_participants < 0) fail(ErrorCode::InvalidArgument, "n_participants must be >= 0");
    if (separability < 0.0 || separability > 1.0) fail(ErrorCode::InvalidArgument, "separability must lie in [0, 1]");
    if (emg.noise_uV < 0 || emg.burst_uV < 0 || imu.accel_noise < 0 || imu.mag_noise < 0 || imu.gyro_noise < 0 ||
        emg.spread < 0 || imu.accel_offset < 0 || imu.mag_offset < 0 || imu.accel_osc < 0 || imu.gyro_signature < 0)
      fail(ErrorCode::InvalidArgument, "amplitudes must be nonnegative");
    if (reaction_min_s < 0.0 || reaction_max_s < reaction_min_s) fail(ErrorCode::InvalidArgument, "bad reaction delay range");
    if (!(emg.band_lo_hz > 0.0 && emg.band_hi_hz > emg.band_lo_hz && emg.band_hi_hz < kEmgRateHz / 2.0))
      fail(ErrorCode::InvalidArgument, "bad EMG burst band");
  }

  /// EMG moderately informative, accelerometer and magnetometer informative,
  /// gyroscope carrying nothing but noise.
  static SynthSpec study_like(std::uint64_t seed = 1) {
    SynthSpec s;
    s.seed = seed;
    return s;
  }

  ScheduleParams schedule_for(Posture p) const {
    ScheduleParams sp = schedule;
    if (calibration_first_posture_only && p != Posture::Deg90) sp.calibration_s = 0.0;
    return sp;
  }
};

inline nlohmann::json to_json(const SynthSpec& s) {
  return {{"seed", s.seed},
          {"n_participants", s.n_participants},
          {"schedule",
           {{"gesture_s", s.schedule.gesture_s},
            {"rest_s", s.schedule.rest_s},
            {"reps", s.schedule.reps},
            {"n_gestures", s.schedule.n_gestures},
            {"pre_gesture_rest_s", s.schedule.pre_gesture_rest_s},
            {"calibration_s", s.schedule.calibration_s}}},
          {"separability", s.separability},
          {"emg",
           {{"noise_uV", s.emg.noise_uV},
            {"burst_uV", s.emg.burst_uV},
            {"spread", s.emg.spread},
            {"rep_jitter", s.emg.rep_jitter},
            {"channel_jitter", s.emg.channel_jitter},
            {"band_lo_hz", s.emg.band_lo_hz},
            {"band_hi_hz", s.emg.band_hi_hz}}},
          {"imu",
           {{"gravity", s.imu.gravity},
            {"accel_noise", s.imu.accel_noise},
            {"accel_offset", s.imu.accel_offset},
            {"accel_rep_jitter", s.imu.accel_rep_jitter},
            {"accel_osc", s.imu.accel_osc},
            {"field_uT", s.imu.field_uT},
            {"mag_noise", s.imu.mag_noise},
            {"mag_offset", s.imu.mag_offset},
            {"mag_rep_jitter", s.imu.mag_rep_jitter},
            {"gyro_noise", s.imu.gyro_noise},
            {"gyro_signature", s.imu.gyro_signature}}},
          {"reaction_min_s", s.reaction_min_s},
          {"reaction_max_s", s.reaction_max_s},
          {"reaction_jitter_s", s.reaction_jitter_s},
          {"ramp_s", s.ramp_s},
          {"participant_variability", s.participant_variability},
          {"calibration_first_posture_only", s.calibration_first_posture_only}};
}

/// Missing keys keep their defaults.
inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  auto get = [](const nlohmann::json& o, const char* key, auto& dst) {
    if (o.contains(key)) dst = o.at(key).get<std::decay_t<decltype(dst)>>();
  };
  try {
    get(j, "seed", s.seed);
    get(j, "n_participants", s.n_participants);
    if (j.contains("schedule")) {
      const auto& o = j.at("schedule");
      get(o, "gesture_s", s.schedule.gesture_s);
      get(o, "rest_s", s.schedule.rest_s);
      get(o, "reps", s.schedule.reps);
      get(o, "n_gestures", s.schedule.n_gestures);
      get(o, "pre_gesture_rest_s", s.schedule.pre_gesture_rest_s);
      get(o, "calibration_s", s.schedule.calibration_s);
    }
    get(j, "separability", s.separability);
    if (j.contains("emg")) {
      const auto& o = j.at("emg");
      get(o, "noise_uV", s.emg.noise_uV);
      get(o, "burst_uV", s.emg.burst_uV);
      get(o, "spread", s.emg.spread);
      get(o, "rep_jitter", s.emg.rep_jitter);
      get(o, "channel_jitter", s.emg.channel_jitter);
      get(o, "band_lo_hz", s.emg.band_lo_hz);
      get(o, "band_hi_hz", s.emg.band_hi_hz);
    }
    if (j.contains("imu")) {
      const auto& o = j.at("imu");
      get(o, "gravity", s.imu.gravity);
      get(o, "accel_noise", s.imu.accel_noise);
      get(o, "accel_offset", s.imu.accel_offset);
      get(o, "accel_rep_jitter", s.imu.accel_rep_jitter);
      get(o, "accel_osc", s.imu.accel_osc);
      get(o, "field_uT", s.imu.field_uT);
      get(o, "mag_noise", s.imu.mag_noise);
      get(o, "mag_offset", s.imu.mag_offset);
      get(o, "mag_rep_jitter", s.imu.mag_rep_jitter);
      get(o, "gyro_noise", s.imu.gyro_noise);
      get(o, "gyro_signature", s.imu.gyro_signature);
    }
    get(j, "reaction_min_s", s.reaction_min_s);
    get(j, "reaction_max_s", s.reaction_max_s);
    get(j, "reaction_jitter_s", s.reaction_jitter_s);
    get(j, "ramp_s", s.ramp_s);
    get(j, "participant_variability", s.participant_variability);
    get(j, "calibration_first_posture_only", s.calibration_first_posture_only);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline std::string participant_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%02d", index + 1);
  return buf;
}

struct SynthSession {
  Recording recording;
  LabelTrack truth;        // actual activation spans (cue + reaction delay)
  ScheduleParams schedule; // the cue schedule as given to the participant
  double reaction_delay_s = 0.0;
};

namespace detail {

/// Signature tables shared by every participant (gestures look alike across
/// people), drawn from the spec seed.
struct Signatures {
  // [gesture][placement]
  std::vector<std::array<double, 8>> emg_log_amp;
  std::vector<std::array<std::array<double, 3>, 8>> accel, mag, gyro;
  std::vector<std::array<double, 8>> osc_amp;
  std::vector<double> osc_freq;
};

inline Signatures make_signatures(const SynthSpec& spec, int participant) {
  const auto n = static_cast<std::size_t>(spec.schedule.n_gestures);
  Signatures s;
  s.emg_log_amp.resize(n);
  s.accel.resize(n);
  s.mag.resize(n);
  s.gyro.resize(n);
  s.osc_amp.resize(n);
  s.osc_freq.resize(n);
  auto shared = stream(spec.seed, {kSignature});
  // each participant performs the gestures a little differently
  auto own = stream(spec.seed, {kSignature, static_cast<std::uint64_t>(participant)});
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(1.0, 4.5);
  constexpr double kPersonal = 0.35;
  auto draw = [&] { return z(shared) + kPersonal * z(own); };
  const double sep = spec.separability;
  for (std::size_t g = 0; g < n; ++g) {
    s.osc_freq[g] = u(shared);
    for (std::size_t p = 0; p < 8; ++p) {
      s.emg_log_amp[g][p] = sep * spec.emg.spread * draw();
      for (std::size_t a = 0; a < 3; ++a) {
        s.accel[g][p][a] = sep * spec.imu.accel_offset * draw();
        s.mag[g][p][a] = sep * spec.imu.mag_offset * draw();
        s.gyro[g][p][a] = sep * spec.imu.gyro_signature * draw();
      }
      s.osc_amp[g][p] = sep * spec.imu.accel_osc * std::abs(draw());
    }
  }
  return s;
}

inline double ramp(double t, double t0, double t1, double width) {
  if (t <= t0 || t >= t1) return 0.0;
  const double w = std::min(width, (t1 - t0) / 2.0);
  if (w <= 0.0) return 1.0;
  const double edge = std::min(t - t0, t1 - t);
  if (edge >= w) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * edge / w);
}

struct Event {
  int gesture;
  int repetition;
  double start_s, end_s;
  double emg_common;  // log jitter shared by channels
};

}  // namespace detail

/// Deterministic in (spec, participant, posture).
inline SynthSession gen_session(const SynthSpec& spec, int participant, Posture posture = Posture::Deg90) {
  spec.validate();
  const auto pidx = static_cast<std::uint64_t>(participant);
  const auto post = static_cast<std::uint64_t>(posture);
  SynthSession out;
  out.schedule = spec.schedule_for(posture);
  const LabelTrack cue = generate_label_schedule(out.schedule);
  const double total = out.schedule.total_s();

  auto prng = stream(spec.seed, {kParticipant, pidx});
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double jitter_scale = std::exp(spec.participant_variability * z(prng));
  const double emg_gain = std::exp(0.2 * z(prng));
  const double mag_heading = 2.0 * std::numbers::pi * unit(prng);

  auto erng = stream(spec.seed, {kEvents, pidx, post});
  out.reaction_delay_s = spec.reaction_min_s + (spec.reaction_max_s - spec.reaction_min_s) * unit(erng);
  std::vector<detail::Event> events;
  for (const auto& s : cue.segments) {
    if (s.kind == SegmentKind::Gesture) {
      const double d = out.reaction_delay_s + spec.reaction_jitter_s * std::clamp(z(erng), -2.0, 2.0);
      events.push_back({s.gesture, s.repetition, s.start_s + d, s.end_s + d,
                        spec.emg.rep_jitter * jitter_scale * z(erng)});
    }
  }
  for (const auto& s : cue.segments) {
    Segment t = s;
    if (s.kind == SegmentKind::Gesture) {
      for (const auto& e : events)
        if (e.gesture == s.gesture && e.repetition == s.repetition) {
          t.start_s = e.start_s;
          t.end_s = e.end_s;
        }
    }
    out.truth.segments.push_back(t);
  }

  const auto sig = detail::make_signatures(spec, participant);
  Recording& rec = out.recording;
  rec.participant_id = participant_id(participant);
  rec.posture = posture;
  rec.calibration_start_s = 0.0;
  rec.calibration_end_s = out.schedule.calibration_s;

  // Gravity and field directions in the sensor frame depend on the elbow angle.
  const double tilt = posture == Posture::Deg90 ? 0.0 : std::numbers::pi / 2.0;
  const std::array<double, 3> gravity = {spec.imu.gravity * std::sin(tilt), 0.0, -spec.imu.gravity * std::cos(tilt)};
  const std::array<double, 3> field = {spec.imu.field_uT * 0.4 * std::cos(mag_heading),
                                       spec.imu.field_uT * 0.4 * std::sin(mag_heading),
                                       -spec.imu.field_uT * 0.9};

  const auto n_emg = static_cast<std::size_t>(std::llround(total * kEmgRateHz));
  const auto n_imu = static_cast<std::size_t>(std::llround(total * kImuRateHz));

  for (auto placement : kAllPlacements) {
    const auto pl = static_cast<std::size_t>(placement);
    for (auto kind : kAllChannelKinds) {
      const auto k = static_cast<std::uint64_t>(kind);
      auto rng = stream(spec.seed, {kChannel, pidx, post, pl, k});
      Channel ch{placement, kind, native_rate_hz(kind), {}};
      if (is_emg(kind)) {
        ch.samples.resize(n_emg);
        // band-limited burst carrier, unit RMS
        auto brng = stream(spec.seed, {kBurst, pidx, post, pl});
        std::vector<double> carrier(n_emg);
        for (auto& v : carrier) v = z(brng);
        dsp::FilterSpec band;
        band.band_lo_hz = spec.emg.band_lo_hz;
        band.band_hi_hz = spec.emg.band_hi_hz;
        band.zero_phase = false;
        carrier = dsp::sosfilt(dsp::design_bandpass(band, kEmgRateHz), carrier);
        double ss = 0.0;
        for (double v : carrier) ss += v * v;
        const double norm = n_emg ? 1.0 / std::sqrt(ss / static_cast<double>(n_emg)) : 1.0;
        std::vector<double> env(n_emg, 0.0);
        for (const auto& e : events) {
          const double amp = spec.emg.burst_uV * emg_gain *
                             std::exp(sig.emg_log_amp[static_cast<std::size_t>(e.gesture)][pl] + e.emg_common +
                                      spec.emg.channel_jitter * jitter_scale * z(rng));
          const auto a = static_cast<std::size_t>(std::max(0.0, std::floor(e.start_s * kEmgRateHz)));
          const auto b = std::min(n_emg, static_cast<std::size_t>(std::ceil(e.end_s * kEmgRateHz)) + 1);
          for (std::size_t i = a; i < b; ++i)
            env[i] += amp * detail::ramp(static_cast<double>(i) / kEmgRateHz, e.start_s, e.end_s, spec.ramp_s);
        }
        for (std::size_t i = 0; i < n_emg; ++i)
          ch.samples[i] = spec.emg.noise_uV * z(rng) + env[i] * carrier[i] * norm;
      } else {
        const auto axis = static_cast<std::size_t>((k - 1) % 3);
        const Modality m = modality_of(kind);
        ch.samples.resize(n_imu);
        double base = 0.0, noise = 0.0, rep_jitter = 0.0;
        if (m == Modality::Accel) {
          base = gravity[axis] + 0.5 * z(rng);
          noise = spec.imu.accel_noise;
          rep_jitter = spec.imu.accel_rep_jitter * jitter_scale;
        } else if (m == Modality::Mag) {
          base = field[axis] + 2.0 * z(rng);
          noise = spec.imu.mag_noise;
          rep_jitter = spec.imu.mag_rep_jitter * jitter_scale;
        } else {
          noise = spec.imu.gyro_noise;
          rep_jitter = spec.imu.gyro_signature * 0.2 * jitter_scale;
        }
        std::vector<double> shape(n_imu, 0.0);
        for (const auto& e : events) {
          const auto g = static_cast<std::size_t>(e.gesture);
          const double off =
              (m == Modality::Accel ? sig.accel[g][pl][axis] : m == Modality::Mag ? sig.mag[g][pl][axis] : sig.gyro[g][pl][axis]) +
              rep_jitter * z(rng);
          const double osc = m == Modality::Accel ? sig.osc_amp[g][pl] : 0.0;
          const double phase = 2.0 * std::numbers::pi * unit(rng);
          const auto a = static_cast<std::size_t>(std::max(0.0, std::floor(e.start_s * kImuRateHz)));
          const auto b = std::min(n_imu, static_cast<std::size_t>(std::ceil(e.end_s * kImuRateHz)) + 1);
          for (std::size_t i = a; i < b; ++i) {
            const double t = static_cast<double>(i) / kImuRateHz;
            shape[i] += detail::ramp(t, e.start_s, e.end_s, spec.ramp_s) *
                        (off + osc * std::sin(2.0 * std::numbers::pi * sig.osc_freq[g] * t + phase));
          }
        }
        for (std::size_t i = 0; i < n_imu; ++i) ch.samples[i] = base + shape[i] + noise * z(rng);
      }
      rec.channels.push_back(std::move(ch));
    }
  }
  return out;
}

}  // namespace hgr::synth
