#pragma once

#include <hgr/core.hpp>
#include <hgr/spectrum.hpp>
#include <hgr/stats.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hgr::quality {

/// Population standard deviation of the mean-removed calibration signal.
inline double calibration_noise(std::span<const double> x) {
  if (x.size() < 2) fail(ErrorCode::EmptyCalibration, "calibration span needs at least 2 samples");
  // shifted by the first sample: large offsets cancel before the sums, constants give exactly 0
  const double k = x[0];
  double m = 0.0;
  for (double v : x) m += v - k;
  m /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - k - m) * (v - k - m);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

/// One noise value per tri-axial sensor: the mean of its three axis sigmas.
inline double imu_sensor_noise(std::span<const double> axis_sigmas) {
  if (axis_sigmas.size() != 3) fail(ErrorCode::WrongAxisCount, "expected exactly three axis sigmas");
  return (axis_sigmas[0] + axis_sigmas[1] + axis_sigmas[2]) / 3.0;
}

inline double rms(std::span<const double> x) {
  double ss = 0.0;
  for (double v : x) ss += v * v;
  return std::sqrt(ss / static_cast<double>(x.size()));
}

/// 20 log10(RMS_activation / RMS_resting).
inline double snr(std::span<const double> activation, std::span<const double> resting) {
  if (activation.empty() || resting.empty()) fail(ErrorCode::InvalidArgument, "SNR needs non-empty spans");
  const double r = rms(resting);
  if (!(r > 0.0)) fail(ErrorCode::ZeroRestingPower, "resting RMS is zero");
  return 20.0 * std::log10(rms(activation) / r);
}

inline constexpr double kSmrSignalBandHz = 500.0;
inline constexpr double kSmrMotionBandHz = 20.0;

/// 10 log10(P[0, 500 Hz] / P[0, 20 Hz]) on the one-sided periodogram, bins
/// assigned by center frequency with inclusive edges. An empty motion band
/// returns +infinity.
inline double smr(std::span<const double> x, double rate_hz) {
  if (rate_hz < 2.0 * kSmrSignalBandHz) fail(ErrorCode::NyquistViolation, "SMR needs rate >= 1000 Hz");
  const Spectrum s = periodogram(x, rate_hz);
  double signal = 0.0, motion = 0.0;
  for (std::size_t k = 0; k < s.power.size(); ++k) {
    if (s.freq[k] <= kSmrSignalBandHz) signal += s.power[k];
    if (s.freq[k] <= kSmrMotionBandHz) motion += s.power[k];
  }
  if (!(motion > 0.0)) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / motion);
}

// ---------------------------------------------------------------------------
// Calibration noise report
// ---------------------------------------------------------------------------

struct ChannelNoise {
  Placement placement;
  ChannelKind kind;
  double sigma;
};

struct SensorNoise {
  Placement placement;
  Modality modality;
  double sigma;  // IMU: mean over the three axes
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

inline MeanStd summarize(std::span<const double> v) {
  if (v.empty()) return {};
  return {stats::mean(v), stats::sample_std(v), v.size()};
}

struct NoiseReport {
  std::string participant_id;
  std::vector<ChannelNoise> channels;
  std::vector<SensorNoise> sensors;
  std::map<Modality, MeanStd> modalities;
};

inline NoiseReport noise_report(const Recording& rec) {
  if (!(rec.calibration_end_s > rec.calibration_start_s))
    fail(ErrorCode::EmptyCalibration, "recording has no calibration span");
  NoiseReport out;
  out.participant_id = rec.participant_id;
  std::map<std::pair<Placement, Modality>, std::vector<double>> axes;
  for (const auto& c : rec.channels) {
    const auto a = static_cast<std::size_t>(std::lround(rec.calibration_start_s * c.rate_hz));
    const auto b = std::min(c.samples.size(), static_cast<std::size_t>(std::lround(rec.calibration_end_s * c.rate_hz)));
    if (b <= a) fail(ErrorCode::EmptyCalibration, "calibration span outside channel");
    const double s = calibration_noise(std::span<const double>(c.samples).subspan(a, b - a));
    out.channels.push_back({c.placement, c.kind, s});
    axes[{c.placement, modality_of(c.kind)}].push_back(s);
  }
  std::map<Modality, std::vector<double>> per_modality;
  for (const auto& [key, sig] : axes) {
    const double s = key.second == Modality::Emg ? sig.front() : imu_sensor_noise(sig);
    out.sensors.push_back({key.first, key.second, s});
    per_modality[key.second].push_back(s);
  }
  for (const auto& [m, v] : per_modality) out.modalities[m] = summarize(v);
  return out;
}

// ---------------------------------------------------------------------------
// Per-gesture SNR / SMR table
// ---------------------------------------------------------------------------

enum class SnrReference { AdjacentRest, Calibration };

struct QualityOptions {
  SnrReference reference = SnrReference::AdjacentRest;
  std::vector<Modality> imu_modalities = {Modality::Accel, Modality::Gyro, Modality::Mag};
  stats::StatsOptions stats;
};

struct GestureQuality {
  int gesture = 0;
  MeanStd snr_emg, snr_imu, smr_emg, smr_imu;
  double d_snr = std::numeric_limits<double>::quiet_NaN();
  double d_smr = std::numeric_limits<double>::quiet_NaN();
  double p_snr = std::numeric_limits<double>::quiet_NaN();
  double p_smr = std::numeric_limits<double>::quiet_NaN();
  std::string p_snr_status = "ok";
  std::string p_smr_status = "ok";
  std::size_t smr_infinite = 0;  // channel-repetitions dropped for an empty motion band
};

struct QualityReport {
  std::vector<GestureQuality> rows;
};

namespace detail {

struct ParticipantGestureValues {
  double snr_emg = 0, snr_imu = 0, smr_emg = 0, smr_imu = 0;
  std::size_t smr_infinite = 0;
};

inline std::span<const double> slice(const Channel& c, double t0, double t1) {
  const auto n = static_cast<long>(c.samples.size());
  const long a = std::clamp(std::lround(t0 * c.rate_hz), 0L, n);
  const long b = std::clamp(std::lround(t1 * c.rate_hz), 0L, n);
  return std::span<const double>(c.samples).subspan(static_cast<std::size_t>(a), static_cast<std::size_t>(b - a));
}

/// Per-channel values averaged over channels of each group, for one
/// participant and gesture.
inline ParticipantGestureValues participant_gesture(const Recording& rec, const LabelTrack& labels, int gesture,
                                                    const QualityOptions& opt) {
  std::vector<std::pair<double, double>> act, rest;  // time spans
  const auto& segs = labels.segments;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].kind != SegmentKind::Gesture || segs[i].gesture != gesture) continue;
    act.emplace_back(segs[i].start_s, segs[i].end_s);
    if (opt.reference == SnrReference::AdjacentRest) {
      if (i + 1 < segs.size() && segs[i + 1].kind == SegmentKind::Rest)
        rest.emplace_back(segs[i + 1].start_s, segs[i + 1].end_s);
    }
  }
  if (opt.reference == SnrReference::Calibration) rest.emplace_back(rec.calibration_start_s, rec.calibration_end_s);
  if (act.empty() || rest.empty()) fail(ErrorCode::InvalidArgument, "gesture has no activation or rest span");

  double snr_emg = 0, snr_imu = 0, smr_emg = 0, smr_imu = 0;
  std::size_t n_emg = 0, n_imu = 0, n_smr_emg = 0, n_smr_imu = 0;
  ParticipantGestureValues out;
  for (const auto& c : rec.channels) {
    const Modality m = modality_of(c.kind);
    const bool emg = m == Modality::Emg;
    if (!emg && std::find(opt.imu_modalities.begin(), opt.imu_modalities.end(), m) == opt.imu_modalities.end())
      continue;
    double center = 0.0;
    if (!emg) {  // IMU channels are zero-centered
      for (double v : c.samples) center += v;
      center /= static_cast<double>(c.samples.size());
    }
    std::vector<double> a, r;
    double smr_sum = 0.0;
    std::size_t smr_n = 0;
    for (auto [t0, t1] : act) {
      const auto s = slice(c, t0, t1);
      std::vector<double> centered(s.begin(), s.end());
      for (auto& v : centered) v -= center;
      a.insert(a.end(), centered.begin(), centered.end());
      const double v = smr(centered, c.rate_hz);
      if (std::isfinite(v)) {
        smr_sum += v;
        ++smr_n;
      } else {
        ++out.smr_infinite;
      }
    }
    for (auto [t0, t1] : rest)
      for (double v : slice(c, t0, t1)) r.push_back(v - center);
    const double s = snr(a, r);
    (emg ? snr_emg : snr_imu) += s;
    (emg ? n_emg : n_imu) += 1;
    if (smr_n > 0) {
      (emg ? smr_emg : smr_imu) += smr_sum / static_cast<double>(smr_n);
      (emg ? n_smr_emg : n_smr_imu) += 1;
    }
  }
  auto avg = [](double s, std::size_t n) { return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN(); };
  out.snr_emg = avg(snr_emg, n_emg);
  out.snr_imu = avg(snr_imu, n_imu);
  out.smr_emg = avg(smr_emg, n_smr_emg);
  out.smr_imu = avg(smr_imu, n_smr_imu);
  return out;
}

}  // namespace detail

/// One participant's per-gesture values, so cohorts can be streamed one
/// recording at a time.
struct ParticipantQuality {
  std::string participant_id;
  std::map<int, detail::ParticipantGestureValues> gestures;
};

inline ParticipantQuality participant_quality(const Recording& rec, const LabelTrack& labels,
                                              const QualityOptions& opt = {}) {
  ParticipantQuality out;
  out.participant_id = rec.participant_id;
  for (const auto& s : labels.segments)
    if (s.kind == SegmentKind::Gesture && !out.gestures.contains(s.gesture))
      out.gestures[s.gesture] = detail::participant_gesture(rec, labels, s.gesture, opt);
  return out;
}

/// Averages channels within each participant first, then participants.
/// Every participant must cover the same gestures.
inline QualityReport aggregate_quality(std::span<const ParticipantQuality> parts, const QualityOptions& opt = {}) {
  if (parts.empty()) fail(ErrorCode::InvalidArgument, "no participants");
  QualityReport report;
  for (const auto& [g, unused] : parts.front().gestures) {
    std::vector<double> se, si, me, mi;
    std::vector<std::string> who;
    GestureQuality row;
    row.gesture = g;
    for (const auto& p : parts) {
      const auto it = p.gestures.find(g);
      if (it == p.gestures.end()) fail(ErrorCode::ParticipantMismatch, p.participant_id + " lacks a gesture");
      const auto& v = it->second;
      se.push_back(v.snr_emg);
      si.push_back(v.snr_imu);
      me.push_back(v.smr_emg);
      mi.push_back(v.smr_imu);
      who.push_back(p.participant_id);
      row.smr_infinite += v.smr_infinite;
    }
    row.snr_emg = summarize(se);
    row.snr_imu = summarize(si);
    row.smr_emg = summarize(me);
    row.smr_imu = summarize(mi);

    auto effect = [](const MeanStd& a, const MeanStd& b) {
      try {
        return stats::cohens_d(a.mean, a.std, b.mean, b.std);
      } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
      }
    };
    row.d_snr = effect(row.snr_emg, row.snr_imu);
    row.d_smr = effect(row.smr_emg, row.smr_imu);
    const auto t_snr = stats::compare_groups({"emg", se, who}, {"imu", si, who}, opt.stats);
    const auto t_smr = stats::compare_groups({"emg", me, who}, {"imu", mi, who}, opt.stats);
    if (t_snr.status != stats::TestStatus::TooFewSamples) row.p_snr = t_snr.p_value;
    if (t_smr.status != stats::TestStatus::TooFewSamples) row.p_smr = t_smr.p_value;
    row.p_snr_status = std::string(stats::to_string(t_snr.status));
    row.p_smr_status = std::string(stats::to_string(t_smr.status));
    report.rows.push_back(row);
  }
  return report;
}

inline QualityReport gesture_quality_table(std::span<const Recording> recs, std::span<const LabelTrack> labels,
                                           const QualityOptions& opt = {}) {
  if (recs.empty() || recs.size() != labels.size())
    fail(ErrorCode::InvalidArgument, "need one label track per recording");
  std::vector<ParticipantQuality> parts;
  for (std::size_t p = 0; p < recs.size(); ++p) parts.push_back(participant_quality(recs[p], labels[p], opt));
  return aggregate_quality(parts, opt);
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace detail {
inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline std::string fmt_num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
}  // namespace detail

inline std::string quality_csv(const QualityReport& r, double alpha = 0.05) {
  using detail::fmt_num;
  std::string out =
      "gesture,name,snr_emg_mean,snr_emg_std,snr_imu_mean,snr_imu_std,d_snr,p_snr,snr_sig,"
      "smr_emg_mean,smr_emg_std,smr_imu_mean,smr_imu_std,d_smr,p_smr,smr_sig,smr_infinite\n";
  for (const auto& g : r.rows) {
    auto sig = [&](double p) { return std::isfinite(p) && p < alpha ? "*" : ""; };
    out += std::to_string(g.gesture) + "," + std::string(kGestureNames[static_cast<std::size_t>(g.gesture)]) + "," +
           fmt_num(g.snr_emg.mean) + "," + fmt_num(g.snr_emg.std) + "," + fmt_num(g.snr_imu.mean) + "," +
           fmt_num(g.snr_imu.std) + "," + fmt_num(g.d_snr) + "," + fmt_num(g.p_snr) + "," + sig(g.p_snr) + "," +
           fmt_num(g.smr_emg.mean) + "," + fmt_num(g.smr_emg.std) + "," + fmt_num(g.smr_imu.mean) + "," +
           fmt_num(g.smr_imu.std) + "," + fmt_num(g.d_smr) + "," + fmt_num(g.p_smr) + "," + sig(g.p_smr) + "," +
           std::to_string(g.smr_infinite) + "\n";
  }
  return out;
}

inline nlohmann::json to_json(const MeanStd& m) {
  return {{"mean", detail::num(m.mean)}, {"std", detail::num(m.std)}, {"n", m.n}};
}

inline nlohmann::json to_json(const QualityReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& g : r.rows)
    rows.push_back({{"gesture", g.gesture},
                    {"name", std::string(kGestureNames[static_cast<std::size_t>(g.gesture)])},
                    {"snr_emg", to_json(g.snr_emg)},
                    {"snr_imu", to_json(g.snr_imu)},
                    {"smr_emg", to_json(g.smr_emg)},
                    {"smr_imu", to_json(g.smr_imu)},
                    {"d_snr", detail::num(g.d_snr)},
                    {"d_smr", detail::num(g.d_smr)},
                    {"p_snr", detail::num(g.p_snr)},
                    {"p_smr", detail::num(g.p_smr)},
                    {"p_snr_status", g.p_snr_status},
                    {"p_smr_status", g.p_smr_status},
                    {"smr_infinite", g.smr_infinite}});
  return {{"rows", rows}};
}

inline nlohmann::json to_json(const NoiseReport& r) {
  nlohmann::json channels = nlohmann::json::array(), sensors = nlohmann::json::array(), mods;
  for (const auto& c : r.channels)
    channels.push_back({{"placement", std::string(to_string(c.placement))},
                        {"kind", std::string(to_string(c.kind))},
                        {"sigma", c.sigma}});
  for (const auto& s : r.sensors)
    sensors.push_back({{"placement", std::string(to_string(s.placement))},
                       {"modality", std::string(to_string(s.modality))},
                       {"sigma", s.sigma}});
  for (const auto& [m, v] : r.modalities) mods[std::string(to_string(m))] = to_json(v);
  return {{"participant_id", r.participant_id}, {"channels", channels}, {"sensors", sensors}, {"modalities", mods}};
}

inline std::string noise_csv(std::span<const NoiseReport> reports) {
  std::string out = "participant,placement,modality,sigma\n";
  for (const auto& r : reports)
    for (const auto& s : r.sensors)
      out += r.participant_id + "," + std::string(to_string(s.placement)) + "," +
             std::string(to_string(s.modality)) + "," + detail::fmt_num(s.sigma) + "\n";
  return out;
}

}  // namespace hgr::quality
