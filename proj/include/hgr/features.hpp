#pragma once

#include <hgr/core.hpp>
#include <hgr/spectrum.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hgr {

// Table order. HIST and AR expand to one column per bin / lag.
enum class Feature : std::uint8_t {
  MAV, VAR, RMS, WL, DAMV, DASDV, ZC, MYOP, WAMP, SSC,
  HIST0, HIST1, HIST2, HIST3, HIST4, HIST5, HIST6, HIST7, HIST8, HIST9,
  AR1, AR2, AR3, AR4,
  MNF, MDF, PKF, TTP, SM1, SM2, SM3, FR, PSR, VCF,
};

inline constexpr std::size_t kNumFeatures = 34;
inline constexpr std::size_t kHistBins = 10;
inline constexpr std::size_t kArOrder = 4;

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "MAV",   "VAR",   "RMS",   "WL",    "DAMV",  "DASDV", "ZC",    "MYOP",  "WAMP",
    "SSC",   "HIST0", "HIST1", "HIST2", "HIST3", "HIST4", "HIST5", "HIST6", "HIST7",
    "HIST8", "HIST9", "AR1",   "AR2",   "AR3",   "AR4",   "MNF",   "MDF",   "PKF",
    "TTP",   "SM1",   "SM2",   "SM3",   "FR",    "PSR",   "VCF"};

constexpr std::string_view to_string(Feature f) { return kFeatureNames[static_cast<std::size_t>(f)]; }

inline std::optional<Feature> parse_feature(std::string_view s) {
  for (std::size_t i = 0; i < kNumFeatures; ++i)
    if (kFeatureNames[i] == s) return static_cast<Feature>(i);
  return std::nullopt;
}

constexpr bool is_threshold_feature(Feature f) { return f == Feature::MYOP || f == Feature::WAMP; }

/// Features computed for a channel: all 34 for EMG, 32 for IMU axes
/// (threshold-based MYOP and WAMP are EMG-only).
inline const std::vector<Feature>& features_for(ChannelKind kind) {
  static const std::vector<Feature> emg = [] {
    std::vector<Feature> v;
    for (std::size_t i = 0; i < kNumFeatures; ++i) v.push_back(static_cast<Feature>(i));
    return v;
  }();
  static const std::vector<Feature> imu = [] {
    std::vector<Feature> v;
    for (auto f : emg)
      if (!is_threshold_feature(f)) v.push_back(f);
    return v;
  }();
  return is_emg(kind) ? emg : imu;
}

struct WindowSpec {
  double length_s = 0.300;
  double step_s = 0.150;

  void validate() const {
    if (!(step_s > 0.0) || !(step_s <= length_s))
      fail(ErrorCode::InvalidArgument, "window spec needs 0 < step <= length");
  }
};

struct ThresholdSpec {
  double zc_eps = 0.0;
  double ssc_eps = 0.0;
  double myop_thresh = 20.0;
  double wamp_thresh = 20.0;
  double hist_range_sigmas = 3.0;
  double fr_split_hz = 250.0;
  double psr_halfwidth_hz = 10.0;
};

/// View into a channel covering one analysis window inside a gesture segment.
struct Window {
  Placement placement = Placement::W1;
  ChannelKind kind = ChannelKind::Emg;
  int gesture = 0;
  int repetition = 0;
  int index = 0;  // position within its segment
  double start_s = 0.0;
  std::span<const double> samples;
};

struct FeatureVector {
  std::vector<double> values;
  std::vector<Feature> names;
};

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

/// Tiles each gesture segment from its onset with the configured step; a
/// window that would cross the segment end (or the channel end) is dropped.
inline std::vector<Window> segment(const Channel& channel, const LabelTrack& labels,
                                   const WindowSpec& spec) {
  spec.validate();
  const double rate = channel.rate_hz;
  const auto n = static_cast<long>(channel.samples.size());
  const long len = std::lround(spec.length_s * rate);
  const long step = std::lround(spec.step_s * rate);
  std::vector<Window> out;
  for (const auto& s : labels.segments) {
    if (s.kind != SegmentKind::Gesture) continue;
    const long a = std::lround(s.start_s * rate);
    const long b = std::lround(s.end_s * rate);
    if (a < -1 || b > n + 1)
      fail(ErrorCode::UnalignedLabels, "gesture segment extends beyond the channel by more than one sample");
    int idx = 0;
    for (long start = a; start + len <= b; start += step, ++idx) {
      if (start < 0 || start + len > n) continue;
      out.push_back({channel.placement, channel.kind, s.gesture, s.repetition, idx,
                     static_cast<double>(start) / rate,
                     std::span<const double>(channel.samples).subspan(static_cast<std::size_t>(start),
                                                                      static_cast<std::size_t>(len))});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-window features
// ---------------------------------------------------------------------------

namespace detail {

/// x[n] = sum_k a_k x[n-k] + e, Yule-Walker on the biased autocorrelation
/// of the mean-removed window, solved by Levinson-Durbin.
inline std::array<double, kArOrder> ar_coefficients(std::span<const double> x, double mean) {
  std::array<double, kArOrder> a{};
  std::array<double, kArOrder + 1> r{};
  const std::size_t n = x.size();
  for (std::size_t k = 0; k <= kArOrder && k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = k; i < n; ++i) acc += (x[i] - mean) * (x[i - k] - mean);
    r[k] = acc;
  }
  if (!(r[0] > 0.0)) return a;
  double err = r[0];
  std::array<double, kArOrder> prev{};
  for (std::size_t m = 1; m <= kArOrder; ++m) {
    double acc = r[m];
    for (std::size_t j = 1; j < m; ++j) acc -= a[j - 1] * r[m - j];
    const double k = acc / err;
    prev = a;
    a[m - 1] = k;
    for (std::size_t j = 1; j < m; ++j) a[j - 1] = prev[j - 1] - k * prev[m - j - 1];
    err *= (1.0 - k * k);
    if (!(err > 0.0)) break;
  }
  return a;
}

}  // namespace detail

/// Writes the time-domain block (24 values for EMG, 22 without the
/// threshold features) into `out` in feature-table order.
inline std::size_t time_features_into(std::span<const double> x, const ThresholdSpec& th,
                                      bool with_threshold_features, std::span<double> out) {
  const std::size_t n = x.size();
  if (n < 2) fail(ErrorCode::SignalTooShort, "time features need at least 2 samples");
  const double nd = static_cast<double>(n);

  double sum = 0.0, sum_abs = 0.0, sum_sq = 0.0;
  std::size_t myop = 0;
  for (double v : x) {
    sum += v;
    sum_abs += std::abs(v);
    sum_sq += v * v;
    if (std::abs(v) >= th.myop_thresh) ++myop;
  }
  const double mean = sum / nd;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = ss / (nd - 1.0);

  double wl = 0.0, d_sq = 0.0;
  std::size_t zc = 0, wamp = 0, ssc = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = x[i + 1] - x[i];
    wl += std::abs(d);
    d_sq += d * d;
    if (std::abs(d) >= th.wamp_thresh) ++wamp;
    if (x[i] * x[i + 1] < 0.0 && std::abs(d) >= th.zc_eps) ++zc;
    if (i >= 1 && (x[i] - x[i - 1]) * (x[i] - x[i + 1]) > th.ssc_eps) ++ssc;
  }

  std::size_t o = 0;
  out[o++] = sum_abs / nd;
  out[o++] = var;
  out[o++] = std::sqrt(sum_sq / nd);
  out[o++] = wl;
  out[o++] = wl / (nd - 1.0);
  out[o++] = std::sqrt(d_sq / (nd - 1.0));
  out[o++] = static_cast<double>(zc);
  if (with_threshold_features) out[o++] = static_cast<double>(myop) / nd;
  if (with_threshold_features) out[o++] = static_cast<double>(wamp);
  out[o++] = static_cast<double>(ssc);

  std::array<double, kHistBins> hist{};
  const double sigma = std::sqrt(var);
  if (sigma > 0.0) {
    const double lo = mean - th.hist_range_sigmas * sigma;
    const double width = 2.0 * th.hist_range_sigmas * sigma / static_cast<double>(kHistBins);
    for (double v : x) {
      const double pos = std::floor((v - lo) / width);
      const auto bin = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(kHistBins - 1)));
      hist[bin] += 1.0;
    }
  } else {
    hist[kHistBins / 2] = nd;  // degenerate window: all mass in the center bin
  }
  for (double h : hist) out[o++] = h;

  for (double a : detail::ar_coefficients(x, mean)) out[o++] = a;
  return o;
}

/// Writes the ten frequency-domain values from a Hann-windowed, mean-removed
/// periodogram. An all-zero window yields zeros; FR with an empty upper band
/// is reported as 0.
inline std::size_t freq_features_into(std::span<const double> x, double rate_hz,
                                      const ThresholdSpec& th, Periodogram& engine,
                                      std::span<double> out) {
  if (x.size() < 8) fail(ErrorCode::SignalTooShort, "frequency features need at least 8 samples");
  const Spectrum& s = engine.compute(x, rate_hz, Taper::Hann, true);
  const auto& f = s.freq;
  const auto& p = s.power;
  double sm0 = 0.0, sm1 = 0.0, sm2 = 0.0, sm3 = 0.0, low = 0.0, high = 0.0;
  std::size_t peak = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    sm0 += p[k];
    sm1 += f[k] * p[k];
    sm2 += f[k] * f[k] * p[k];
    sm3 += f[k] * f[k] * f[k] * p[k];
    (f[k] <= th.fr_split_hz ? low : high) += p[k];
    if (p[k] > p[peak]) peak = k;
  }
  if (!(sm0 > 0.0)) {
    std::fill_n(out.begin(), 10, 0.0);
    return 10;
  }
  double cum = 0.0, mdf = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    cum += p[k];
    if (cum >= sm0 / 2.0) {
      mdf = f[k];
      break;
    }
  }
  const double pkf = f[peak];
  double near_peak = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (std::abs(f[k] - pkf) <= th.psr_halfwidth_hz) near_peak += p[k];
  const double mnf = sm1 / sm0;

  std::size_t o = 0;
  out[o++] = mnf;
  out[o++] = mdf;
  out[o++] = pkf;
  out[o++] = sm0;
  out[o++] = sm1;
  out[o++] = sm2;
  out[o++] = sm3;
  out[o++] = high > 0.0 ? low / high : 0.0;
  out[o++] = near_peak / sm0;
  out[o++] = sm2 / sm0 - mnf * mnf;
  return o;
}

/// Full feature row for one channel window, in `features_for(kind)` order.
inline std::size_t channel_features_into(std::span<const double> x, double rate_hz, ChannelKind kind,
                                         const ThresholdSpec& th, Periodogram& engine,
                                         std::span<double> out) {
  const std::size_t t = time_features_into(x, th, is_emg(kind), out);
  return t + freq_features_into(x, rate_hz, th, engine, out.subspan(t));
}

inline FeatureVector time_features(const Window& w, const ThresholdSpec& th) {
  const bool emg = is_emg(w.kind);
  FeatureVector fv;
  fv.values.resize(kNumFeatures);
  fv.values.resize(time_features_into(w.samples, th, emg, fv.values));
  for (auto f : features_for(w.kind)) {
    if (f >= Feature::MNF) break;
    fv.names.push_back(f);
  }
  return fv;
}

inline FeatureVector freq_features(const Window& w, double rate_hz, const ThresholdSpec& th) {
  Periodogram engine;
  FeatureVector fv;
  fv.values.resize(10);
  freq_features_into(w.samples, rate_hz, th, engine, fv.values);
  for (auto f = static_cast<std::size_t>(Feature::MNF); f < kNumFeatures; ++f)
    fv.names.push_back(static_cast<Feature>(f));
  return fv;
}

inline FeatureVector channel_features(const Window& w, double rate_hz, const ThresholdSpec& th) {
  Periodogram engine;
  FeatureVector fv;
  fv.names = features_for(w.kind);
  fv.values.resize(fv.names.size());
  channel_features_into(w.samples, rate_hz, w.kind, th, engine, fv.values);
  return fv;
}

// ---------------------------------------------------------------------------
// Feature matrix
// ---------------------------------------------------------------------------

struct ColumnId {
  Placement placement = Placement::W1;
  ChannelKind kind = ChannelKind::Emg;
  Feature feature = Feature::MAV;

  std::string name() const {
    return std::string(to_string(placement)) + "." + std::string(to_string(kind)) + "." +
           std::string(to_string(feature));
  }
  friend auto operator<=>(const ColumnId&, const ColumnId&) = default;
};

struct RowId {
  int gesture = 0;
  int repetition = 0;
  int window = 0;
  friend auto operator<=>(const RowId&, const RowId&) = default;
};

using ChannelSelection = std::set<std::pair<Placement, Modality>>;

struct FeatureMatrix {
  std::vector<RowId> rows;
  std::vector<ColumnId> cols;
  Eigen::MatrixXd data;  // rows x cols

  std::vector<int> labels() const {
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y[i] = rows[i].gesture;
    return y;
  }

  /// Column subset for the given (placement, modality) pairs; row set kept.
  FeatureMatrix select(const ChannelSelection& sel) const {
    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < cols.size(); ++j)
      if (sel.contains({cols[j].placement, modality_of(cols[j].kind)}))
        keep.push_back(static_cast<Eigen::Index>(j));
    if (keep.empty()) fail(ErrorCode::EmptySelection, "no columns match the channel selection");
    FeatureMatrix out;
    out.rows = rows;
    out.data.resize(data.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
      out.cols.push_back(cols[static_cast<std::size_t>(keep[j])]);
      out.data.col(static_cast<Eigen::Index>(j)) = data.col(keep[j]);
    }
    return out;
  }
};

/// Windows x features for the selected channels. Rows are the windows
/// present in every selected channel, sorted by (gesture, repetition,
/// window); columns follow (placement, kind, feature) enum order.
inline FeatureMatrix extract_matrix(const Recording& rec, const LabelTrack& labels,
                                    const WindowSpec& wspec, const ThresholdSpec& th,
                                    const ChannelSelection& selection) {
  if (selection.empty()) fail(ErrorCode::EmptySelection, "channel selection is empty");
  std::vector<const Channel*> chans;
  for (const auto& c : rec.channels)
    if (selection.contains({c.placement, modality_of(c.kind)})) chans.push_back(&c);
  if (chans.empty()) fail(ErrorCode::EmptySelection, "recording has no channels in the selection");
  std::sort(chans.begin(), chans.end(), [](const Channel* a, const Channel* b) {
    return std::pair(a->placement, a->kind) < std::pair(b->placement, b->kind);
  });

  std::vector<std::vector<Window>> windows;
  std::map<RowId, std::size_t> seen;
  for (const Channel* c : chans) {
    windows.push_back(segment(*c, labels, wspec));
    for (const auto& w : windows.back()) ++seen[RowId{w.gesture, w.repetition, w.index}];
  }

  FeatureMatrix fm;
  std::map<RowId, Eigen::Index> row_index;
  for (const auto& [id, count] : seen)
    if (count == chans.size()) {
      row_index[id] = static_cast<Eigen::Index>(fm.rows.size());
      fm.rows.push_back(id);
    }
  for (const Channel* c : chans)
    for (auto f : features_for(c->kind)) fm.cols.push_back({c->placement, c->kind, f});

  fm.data.resize(static_cast<Eigen::Index>(fm.rows.size()), static_cast<Eigen::Index>(fm.cols.size()));
  Periodogram engine;
  std::array<double, kNumFeatures> buf{};
  Eigen::Index col0 = 0;
  for (std::size_t ci = 0; ci < chans.size(); ++ci) {
    const Channel* c = chans[ci];
    const auto width = static_cast<Eigen::Index>(features_for(c->kind).size());
    for (const auto& w : windows[ci]) {
      const auto it = row_index.find(RowId{w.gesture, w.repetition, w.index});
      if (it == row_index.end()) continue;
      channel_features_into(w.samples, c->rate_hz, c->kind, th, engine, buf);
      for (Eigen::Index j = 0; j < width; ++j) fm.data(it->second, col0 + j) = buf[static_cast<std::size_t>(j)];
    }
    col0 += width;
  }
  return fm;
}

/// Every (placement, modality) pair present in the recording.
inline ChannelSelection full_selection(const Recording& rec) {
  ChannelSelection sel;
  for (const auto& c : rec.channels) sel.insert({c.placement, modality_of(c.kind)});
  return sel;
}

}  // namespace hgr
