#pragma once

#include <hgr/error.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hgr {

// ---------------------------------------------------------------------------
// Sensor vocabulary
// ---------------------------------------------------------------------------

enum class ChannelKind : std::uint8_t {
  Emg,
  AccelX, AccelY, AccelZ,
  GyroX, GyroY, GyroZ,
  MagX, MagY, MagZ,
};

inline constexpr std::array<ChannelKind, 10> kAllChannelKinds = {
    ChannelKind::Emg,   ChannelKind::AccelX, ChannelKind::AccelY, ChannelKind::AccelZ,
    ChannelKind::GyroX, ChannelKind::GyroY,  ChannelKind::GyroZ,  ChannelKind::MagX,
    ChannelKind::MagY,  ChannelKind::MagZ};

inline constexpr std::array<ChannelKind, 9> kImuKinds = {
    ChannelKind::AccelX, ChannelKind::AccelY, ChannelKind::AccelZ,
    ChannelKind::GyroX,  ChannelKind::GyroY,  ChannelKind::GyroZ,
    ChannelKind::MagX,   ChannelKind::MagY,   ChannelKind::MagZ};

enum class Modality : std::uint8_t { Emg, Accel, Gyro, Mag };

inline constexpr std::array<Modality, 4> kAllModalities = {Modality::Emg, Modality::Accel,
                                                          Modality::Gyro, Modality::Mag};

constexpr Modality modality_of(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::Emg: return Modality::Emg;
    case ChannelKind::AccelX:
    case ChannelKind::AccelY:
    case ChannelKind::AccelZ: return Modality::Accel;
    case ChannelKind::GyroX:
    case ChannelKind::GyroY:
    case ChannelKind::GyroZ: return Modality::Gyro;
    default: return Modality::Mag;
  }
}

constexpr bool is_emg(ChannelKind kind) { return kind == ChannelKind::Emg; }

inline constexpr double kEmgRateHz = 2000.0;
inline constexpr double kImuRateHz = 200.0;

constexpr double native_rate_hz(ChannelKind kind) { return is_emg(kind) ? kEmgRateHz : kImuRateHz; }

constexpr std::string_view to_string(ChannelKind kind) {
  constexpr std::array<std::string_view, 10> names = {"EMG", "ACCEL_X", "ACCEL_Y", "ACCEL_Z",
                                                      "GYRO_X", "GYRO_Y", "GYRO_Z", "MAG_X",
                                                      "MAG_Y", "MAG_Z"};
  return names[static_cast<std::size_t>(kind)];
}

constexpr std::string_view to_string(Modality m) {
  constexpr std::array<std::string_view, 4> names = {"emg", "accel", "gyro", "mag"};
  return names[static_cast<std::size_t>(m)];
}

enum class Placement : std::uint8_t { W1, W2, W3, W4, F1, F2, F3, F4 };

inline constexpr std::array<Placement, 8> kAllPlacements = {
    Placement::W1, Placement::W2, Placement::W3, Placement::W4,
    Placement::F1, Placement::F2, Placement::F3, Placement::F4};

constexpr std::string_view to_string(Placement p) {
  constexpr std::array<std::string_view, 8> names = {"W1", "W2", "W3", "W4",
                                                     "F1", "F2", "F3", "F4"};
  return names[static_cast<std::size_t>(p)];
}

constexpr bool is_wrist(Placement p) { return p <= Placement::W4; }

enum class Posture : std::uint8_t { Deg90, Deg180 };

constexpr std::string_view to_string(Posture p) { return p == Posture::Deg90 ? "90" : "180"; }

inline std::optional<Placement> parse_placement(std::string_view s) {
  for (auto p : kAllPlacements)
    if (to_string(p) == s) return p;
  return std::nullopt;
}

inline std::optional<ChannelKind> parse_channel_kind(std::string_view s) {
  for (auto k : kAllChannelKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline std::optional<Posture> parse_posture(std::string_view s) {
  if (s == "90") return Posture::Deg90;
  if (s == "180") return Posture::Deg180;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Gestures
// ---------------------------------------------------------------------------

inline constexpr int kNumGestures = 17;

// Confusion-matrix order: 0:TE ... 16:RD. Rest is a label, never a class.
inline constexpr std::array<std::string_view, kNumGestures> kGestureNames = {
    "TE", "IE", "ME", "RE", "PE", "TU", "RA", "PO", "OK",
    "H",  "HL", "PG", "HO", "WE", "WF", "UD", "RD"};

struct GestureId {
  int value = 0;

  constexpr GestureId() = default;
  constexpr explicit GestureId(int v) : value(v) {
    if (v < 0 || v >= kNumGestures) throw Error(ErrorCode::InvalidArgument, "gesture id out of range");
  }
  constexpr std::string_view name() const { return kGestureNames[static_cast<std::size_t>(value)]; }
  friend constexpr auto operator<=>(GestureId, GestureId) = default;
};

// ---------------------------------------------------------------------------
// Signals
// ---------------------------------------------------------------------------

struct Channel {
  Placement placement = Placement::W1;
  ChannelKind kind = ChannelKind::Emg;
  double rate_hz = kEmgRateHz;
  std::vector<double> samples;

  double duration_s() const { return static_cast<double>(samples.size()) / rate_hz; }
};

struct Recording {
  std::string participant_id;
  Posture posture = Posture::Deg90;
  std::vector<Channel> channels;
  double calibration_start_s = 0.0;
  double calibration_end_s = 0.0;

  const Channel* find(Placement p, ChannelKind k) const {
    for (const auto& c : channels)
      if (c.placement == p && c.kind == k) return &c;
    return nullptr;
  }

  std::size_t count(Modality m) const {
    return static_cast<std::size_t>(std::count_if(
        channels.begin(), channels.end(), [m](const Channel& c) { return modality_of(c.kind) == m; }));
  }

  /// Enforces one channel per (placement, kind) and a shared wall-clock span
  /// (within one sample of the slowest channel).
  void validate() const {
    double span = -1.0;
    double slowest = 0.0;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      const auto& c = channels[i];
      if (!(c.rate_hz > 0.0)) fail(ErrorCode::InvalidArgument, "channel rate must be positive");
      for (std::size_t j = 0; j < i; ++j)
        if (channels[j].placement == c.placement && channels[j].kind == c.kind)
          fail(ErrorCode::DuplicateChannel,
               std::string(to_string(c.placement)) + "/" + std::string(to_string(c.kind)));
      if (c.rate_hz < slowest || slowest == 0.0) slowest = c.rate_hz;
      if (span < 0.0) span = c.duration_s();
    }
    for (const auto& c : channels)
      if (std::abs(c.duration_s() - span) > 1.0 / slowest + 1e-9)
        fail(ErrorCode::InvalidArgument, "channels do not share a common span");
  }
};

// ---------------------------------------------------------------------------
// Protocol schedule and labels
// ---------------------------------------------------------------------------

struct ScheduleParams {
  double gesture_s = 2.0;
  double rest_s = 2.0;
  int reps = 4;
  int n_gestures = kNumGestures;
  double pre_gesture_rest_s = 5.0;
  double calibration_s = 15.0;

  void validate() const {
    if (!(gesture_s > 0.0) || rest_s < 0.0 || reps <= 0 || n_gestures <= 0 ||
        n_gestures > kNumGestures || pre_gesture_rest_s < 0.0 || calibration_s < 0.0)
      fail(ErrorCode::InvalidArgument, "schedule parameters out of range");
  }

  /// Length of the cued protocol in seconds.
  double total_s() const {
    return calibration_s + n_gestures * (pre_gesture_rest_s + reps * (gesture_s + rest_s));
  }
};

enum class SegmentKind : std::uint8_t { Calibration, Rest, Gesture };

struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;
  SegmentKind kind = SegmentKind::Rest;
  int gesture = -1;     // valid only for Gesture
  int repetition = -1;  // 0..reps-1, valid only for Gesture

  double duration_s() const { return end_s - start_s; }
  bool operator==(const Segment&) const = default;
};

struct LabelTrack {
  std::vector<Segment> segments;

  std::vector<Segment> gestures() const {
    std::vector<Segment> out;
    for (const auto& s : segments)
      if (s.kind == SegmentKind::Gesture) out.push_back(s);
    return out;
  }

  LabelTrack shifted(double dt) const {
    LabelTrack out = *this;
    for (auto& s : out.segments) {
      s.start_s += dt;
      s.end_s += dt;
    }
    return out;
  }

  bool operator==(const LabelTrack&) const = default;
};

/// Samples produced by a protocol run:
/// (gesture_s + rest_s) * reps * n_gestures * n_channels * rate_hz.
inline std::uint64_t expected_sample_count(double gesture_s, double rest_s, std::uint64_t reps,
                                           std::uint64_t n_gestures, std::uint64_t n_channels,
                                           double rate_hz) {
  if (!(gesture_s > 0.0) || rest_s < 0.0 || reps == 0 || n_gestures == 0 || n_channels == 0 ||
      !(rate_hz > 0.0))
    fail(ErrorCode::InvalidArgument, "expected_sample_count arguments must be positive");
  const double per_channel = (gesture_s + rest_s) * static_cast<double>(reps) *
                             static_cast<double>(n_gestures) * rate_hz;
  return static_cast<std::uint64_t>(std::llround(per_channel)) * n_channels;
}

/// Calibration (if any), then for each gesture: pre-gesture rest followed by
/// `reps` x (gesture, rest).
inline LabelTrack generate_label_schedule(const ScheduleParams& p) {
  p.validate();
  LabelTrack track;
  double t = 0.0;
  auto push = [&](double len, SegmentKind kind, int g = -1, int r = -1) {
    if (len <= 0.0) return;
    track.segments.push_back({t, t + len, kind, g, r});
    t += len;
  };
  push(p.calibration_s, SegmentKind::Calibration);
  for (int g = 0; g < p.n_gestures; ++g) {
    push(p.pre_gesture_rest_s, SegmentKind::Rest);
    for (int r = 0; r < p.reps; ++r) {
      push(p.gesture_s, SegmentKind::Gesture, g, r);
      push(p.rest_s, SegmentKind::Rest);
    }
  }
  return track;
}

// ---------------------------------------------------------------------------
// Activation alignment
// ---------------------------------------------------------------------------

struct AlignmentResult {
  LabelTrack track;
  double shift_s = 0.0;
  long shift_samples = 0;
};

namespace detail {

// Mean over EMG channels of the rectified, mean-removed, moving-averaged
// signal. Returned with its own mean subtracted.
inline std::vector<double> emg_envelope(const Recording& rec, double rate, double smooth_s) {
  std::size_t n = 0;
  std::size_t n_emg = 0;
  for (const auto& c : rec.channels)
    if (is_emg(c.kind)) {
      n = n == 0 ? c.samples.size() : std::min(n, c.samples.size());
      ++n_emg;
    }
  std::vector<double> env(n, 0.0);
  const auto half = static_cast<std::ptrdiff_t>(std::max(1.0, std::round(smooth_s * rate)) / 2);
  std::vector<double> prefix(n + 1);
  for (const auto& c : rec.channels) {
    if (!is_emg(c.kind) || c.rate_hz != rate) continue;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += c.samples[i];
    mean /= static_cast<double>(n);
    prefix[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + std::abs(c.samples[i] - mean);
    const auto sn = static_cast<std::ptrdiff_t>(n);
    for (std::ptrdiff_t i = 0; i < sn; ++i) {
      const auto lo = std::max<std::ptrdiff_t>(0, i - half);
      const auto hi = std::min<std::ptrdiff_t>(sn, i + half + 1);
      env[static_cast<std::size_t>(i)] += (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    }
  }
  double mean = 0.0;
  for (auto& v : env) {
    v /= static_cast<double>(n_emg);
    mean += v;
  }
  if (n > 0) mean /= static_cast<double>(n);
  for (auto& v : env) v -= mean;
  return env;
}

}  // namespace detail

/// Shifts the schedule by the lag in [-max_shift_s, +max_shift_s] that
/// maximizes the correlation between the EMG activation envelope and the
/// gesture-on indicator. Ties resolve to the smallest |lag|, then the
/// negative lag.
inline AlignmentResult align_labels_detailed(const Recording& rec, const LabelTrack& schedule,
                                             double max_shift_s = 0.5) {
  if (max_shift_s < 0.0) fail(ErrorCode::InvalidArgument, "max_shift_s must be >= 0");
  const Channel* first_emg = nullptr;
  for (const auto& c : rec.channels)
    if (is_emg(c.kind)) {
      first_emg = &c;
      break;
    }
  if (first_emg == nullptr) fail(ErrorCode::NoEmgChannel, "alignment needs at least one EMG channel");
  if (max_shift_s == 0.0) return {schedule, 0.0, 0};

  const double rate = first_emg->rate_hz;
  // No extra smoothing: summing over each gesture span already integrates the
  // envelope, and a moving average flattens the peak enough for noise to move
  // it by a few samples.
  const auto env = detail::emg_envelope(rec, rate, 0.0);
  const auto n = static_cast<long>(env.size());
  std::vector<double> prefix(env.size() + 1, 0.0);
  for (std::size_t i = 0; i < env.size(); ++i) prefix[i + 1] = prefix[i] + env[i];

  std::vector<std::pair<long, long>> on;
  for (const auto& s : schedule.segments)
    if (s.kind == SegmentKind::Gesture)
      on.emplace_back(std::lround(s.start_s * rate), std::lround(s.end_s * rate));

  const long max_lag = std::lround(max_shift_s * rate);
  auto score = [&](long lag) {
    double acc = 0.0;
    for (auto [a, b] : on) {
      const long lo = std::clamp(a + lag, 0L, n);
      const long hi = std::clamp(b + lag, 0L, n);
      acc += prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)];
    }
    return acc;
  };

  long best = 0;
  double best_score = score(0);
  for (long k = 1; k <= max_lag; ++k) {
    for (long lag : {-k, k}) {
      const double s = score(lag);
      if (s > best_score) {
        best_score = s;
        best = lag;
      }
    }
  }
  const double dt = static_cast<double>(best) / rate;
  return {schedule.shifted(dt), dt, best};
}

inline LabelTrack align_labels(const Recording& rec, const LabelTrack& schedule,
                               double max_shift_s = 0.5) {
  return align_labels_detailed(rec, schedule, max_shift_s).track;
}

}  // namespace hgr
