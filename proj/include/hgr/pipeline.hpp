#pragma once

#include <hgr/classify/cv.hpp>
#include <hgr/core.hpp>
#include <hgr/dsp.hpp>
#include <hgr/features.hpp>
#include <hgr/stats.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace hgr::pipeline {

struct PlacementPreset {
  std::string name;
  std::vector<Placement> placements;
};

inline const std::vector<PlacementPreset>& placement_presets() {
  using P = Placement;
  static const std::vector<PlacementPreset> presets = {
      {"W1W2", {P::W1, P::W2}},
      {"W3W4", {P::W3, P::W4}},
      {"F1F2", {P::F1, P::F2}},
      {"F3F4", {P::F3, P::F4}},
      {"W1-4", {P::W1, P::W2, P::W3, P::W4}},
      {"F1-4", {P::F1, P::F2, P::F3, P::F4}},
      {"W1-4F1-4", {P::W1, P::W2, P::W3, P::W4, P::F1, P::F2, P::F3, P::F4}},
  };
  return presets;
}

inline const PlacementPreset& find_preset(std::string_view name) {
  for (const auto& p : placement_presets())
    if (p.name == name) return p;
  fail(ErrorCode::InvalidArgument, "unknown placement preset '" + std::string(name) + "'");
}

enum class ModalitySet { Emg, Accel, Gyro, Mag, ImuCombined };

inline constexpr std::array<ModalitySet, 5> kAllModalitySets = {ModalitySet::Emg, ModalitySet::Accel, ModalitySet::Gyro,
                                                                ModalitySet::Mag, ModalitySet::ImuCombined};

constexpr std::string_view to_string(ModalitySet m) {
  constexpr std::array<std::string_view, 5> names = {"emg", "accel", "gyro", "mag", "imu_combined"};
  return names[static_cast<std::size_t>(m)];
}

inline std::optional<ModalitySet> parse_modality_set(std::string_view s) {
  for (auto m : kAllModalitySets)
    if (to_string(m) == s) return m;
  return std::nullopt;
}

inline std::vector<Modality> modalities_of(ModalitySet m) {
  switch (m) {
    case ModalitySet::Emg: return {Modality::Emg};
    case ModalitySet::Accel: return {Modality::Accel};
    case ModalitySet::Gyro: return {Modality::Gyro};
    case ModalitySet::Mag: return {Modality::Mag};
    default: return {Modality::Accel, Modality::Gyro, Modality::Mag};
  }
}

inline ChannelSelection selection(const PlacementPreset& preset, ModalitySet m) {
  ChannelSelection sel;
  for (auto p : preset.placements)
    for (auto mod : modalities_of(m)) sel.insert({p, mod});
  return sel;
}

struct PipelineConfig {
  dsp::FilterSpec filter;
  dsp::SmoothSpec smooth;
  WindowSpec window;
  ThresholdSpec thresholds;
  double max_align_shift_s = 0.5;
  std::vector<std::string> presets;  // empty: all seven
  std::vector<ModalitySet> modalities = {kAllModalitySets.begin(), kAllModalitySets.end()};
  std::vector<classify::Family> families = {classify::Family::Lda};
  classify::Grid lda_grid = classify::Grid::lda();
  classify::Grid svm_grid = classify::Grid::svm();
  classify::CvPlan plan;
  bool permute_labels = false;  // chance-level control
  std::uint64_t permute_seed = 0;

  std::vector<std::string> preset_names() const {
    if (!presets.empty()) return presets;
    std::vector<std::string> out;
    for (const auto& p : placement_presets()) out.push_back(p.name);
    return out;
  }

  const classify::Grid& grid(classify::Family f) const { return f == classify::Family::Lda ? lda_grid : svm_grid; }
};

// ---------------------------------------------------------------------------
// Per-session stages
// ---------------------------------------------------------------------------

struct SessionFeatures {
  FeatureMatrix matrix;
  AlignmentResult alignment;
};

/// EMG channels only, preprocessed; the metadata of `raw` is kept.
inline Recording preprocessed_emg(const Recording& raw, const PipelineConfig& cfg) {
  Recording emg;
  emg.participant_id = raw.participant_id;
  emg.posture = raw.posture;
  emg.calibration_start_s = raw.calibration_start_s;
  emg.calibration_end_s = raw.calibration_end_s;
  for (const auto& c : raw.channels)
    if (is_emg(c.kind)) emg.channels.push_back(c);
  if (emg.channels.empty()) fail(ErrorCode::NoEmgChannel, raw.participant_id + ": no EMG channel");
  return dsp::preprocess_recording(emg, cfg.filter, cfg.smooth);
}

/// Label alignment alone (the label stage).
inline AlignmentResult session_alignment(const Recording& raw, const ScheduleParams& schedule, const PipelineConfig& cfg) {
  raw.validate();
  return align_labels_detailed(preprocessed_emg(raw, cfg), generate_label_schedule(schedule), cfg.max_align_shift_s);
}

/// preprocess -> align -> window -> features for every channel. Channels are
/// preprocessed one at a time so the upsampled IMU never sits in memory whole.
inline SessionFeatures session_features(const Recording& raw, const ScheduleParams& schedule, const PipelineConfig& cfg) {
  raw.validate();
  SessionFeatures out;
  Recording emg = preprocessed_emg(raw, cfg);
  out.alignment = align_labels_detailed(emg, generate_label_schedule(schedule), cfg.max_align_shift_s);
  const LabelTrack& labels = out.alignment.track;

  std::vector<std::pair<std::pair<Placement, ChannelKind>, FeatureMatrix>> parts;
  for (const auto& c : emg.channels) {
    Recording one = emg;
    one.channels = {c};
    parts.push_back({{c.placement, c.kind}, extract_matrix(one, labels, cfg.window, cfg.thresholds, full_selection(one))});
  }
  emg.channels.clear();
  for (const auto& c : raw.channels) {
    if (is_emg(c.kind)) continue;
    Recording one;
    one.channels = {c};
    one = dsp::preprocess_recording(one, cfg.filter, cfg.smooth);
    parts.push_back({{c.placement, c.kind}, extract_matrix(one, labels, cfg.window, cfg.thresholds, full_selection(one))});
  }
  std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  // rows present in every channel
  std::vector<RowId> rows = parts.front().second.rows;
  for (const auto& [key, fm] : parts) {
    std::vector<RowId> keep;
    std::set_intersection(rows.begin(), rows.end(), fm.rows.begin(), fm.rows.end(), std::back_inserter(keep));
    rows = std::move(keep);
  }
  Eigen::Index total_cols = 0;
  for (const auto& [key, fm] : parts) total_cols += fm.data.cols();
  FeatureMatrix& m = out.matrix;
  m.rows = rows;
  m.data.resize(static_cast<Eigen::Index>(rows.size()), total_cols);
  Eigen::Index col = 0;
  for (const auto& [key, fm] : parts) {
    std::vector<Eigen::Index> pick;
    std::size_t r = 0;
    for (std::size_t i = 0; i < fm.rows.size() && r < rows.size(); ++i)
      if (fm.rows[i] == rows[r]) {
        pick.push_back(static_cast<Eigen::Index>(i));
        ++r;
      }
    m.data.middleCols(col, fm.data.cols()) = fm.data(pick, Eigen::all);
    m.cols.insert(m.cols.end(), fm.cols.begin(), fm.cols.end());
    col += fm.data.cols();
  }
  return out;
}

struct CellResult {
  std::string preset;
  ModalitySet modality = ModalitySet::Emg;
  classify::Family family = classify::Family::Lda;
  classify::EvalResult eval;
};

struct SessionOutcome {
  std::string participant_id;
  Posture posture = Posture::Deg90;
  double align_shift_s = 0.0;
  std::vector<CellResult> cells;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

/// Every (preset, modality, family) cell over one feature matrix.
inline std::vector<CellResult> evaluate_features(const FeatureMatrix& features, const PipelineConfig& cfg) {
  FeatureMatrix fm = features;
  if (cfg.permute_labels) classify::permute_labels_within_repetition(fm, cfg.permute_seed);
  std::vector<CellResult> out;
  for (const auto& name : cfg.preset_names()) {
    const auto& preset = find_preset(name);
    for (auto mod : cfg.modalities) {
      const FeatureMatrix sub = fm.select(selection(preset, mod));
      const double dbi = classify::feature_space_dbi(sub);
      for (auto fam : cfg.families) {
        CellResult c;
        c.preset = name;
        c.modality = mod;
        c.family = fam;
        c.eval = classify::cv_evaluate(sub, cfg.plan, cfg.grid(fam), {.compute_dbi = false});
        c.eval.dbi = dbi;
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

inline SessionOutcome evaluate_session(const Recording& raw, const ScheduleParams& schedule, const PipelineConfig& cfg) {
  SessionOutcome out;
  out.participant_id = raw.participant_id;
  out.posture = raw.posture;
  try {
    const auto sf = session_features(raw, schedule, cfg);
    out.align_shift_s = sf.alignment.shift_s;
    out.cells = evaluate_features(sf.matrix, cfg);
  } catch (const Error& e) {
    out.cells.clear();
    out.error = std::string(to_string(e.code())) + ": " + e.what();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results go to
/// index-addressed slots, so output order never depends on scheduling.
/// The first exception (by index) is rethrown after all workers finish.
template <typename T>
std::vector<T> parallel_map(std::size_t n, unsigned jobs, const std::function<T(std::size_t)>& fn) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned k = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (k <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct SessionSource {
  std::string label;
  std::function<std::pair<Recording, ScheduleParams>()> load;
};

/// Participant-level parallel evaluation; a failing session is recorded and
/// the rest complete.
inline std::vector<SessionOutcome> run_cohort(const std::vector<SessionSource>& sources, const PipelineConfig& cfg,
                                              unsigned jobs) {
  return parallel_map<SessionOutcome>(sources.size(), jobs, [&](std::size_t i) {
    SessionOutcome o;
    try {
      const auto [rec, schedule] = sources[i].load();
      o = evaluate_session(rec, schedule, cfg);
    } catch (const Error& e) {
      o.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    if (o.participant_id.empty()) o.participant_id = sources[i].label;
    return o;
  });
}

// ---------------------------------------------------------------------------
// Serialization of session outcomes (eval stage output)
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const SessionOutcome& s) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : s.cells) {
    auto j = classify::to_json(c.eval);
    j["preset"] = c.preset;
    j["modality"] = std::string(to_string(c.modality));
    cells.push_back(std::move(j));
  }
  nlohmann::json j = {{"participant_id", s.participant_id},
                      {"posture", std::string(to_string(s.posture))},
                      {"align_shift_s", s.align_shift_s},
                      {"cells", cells}};
  if (!s.ok()) j["error"] = s.error;
  return j;
}

inline SessionOutcome session_outcome_from_json(const nlohmann::json& j) {
  SessionOutcome s;
  try {
    s.participant_id = j.at("participant_id").get<std::string>();
    const auto posture = parse_posture(j.at("posture").get<std::string>());
    if (!posture) fail(ErrorCode::ParseError, "bad posture in result file");
    s.posture = *posture;
    s.align_shift_s = j.value("align_shift_s", 0.0);
    if (j.contains("error")) s.error = j.at("error").get<std::string>();
    for (const auto& cj : j.at("cells")) {
      CellResult c;
      c.preset = cj.at("preset").get<std::string>();
      const auto mod = parse_modality_set(cj.at("modality").get<std::string>());
      const auto fam = classify::parse_family(cj.at("family").get<std::string>());
      if (!mod || !fam) fail(ErrorCode::ParseError, "bad modality or family in result file");
      c.modality = *mod;
      c.family = *fam;
      c.eval.family = *fam;
      c.eval.mean_accuracy = cj.at("mean_accuracy").get<double>();
      c.eval.dbi = cj.at("dbi").is_null() ? std::numeric_limits<double>::quiet_NaN() : cj.at("dbi").get<double>();
      c.eval.n_features = cj.value("n_features", std::size_t{0});
      if (cj.contains("confusion")) {
        const auto& cm = cj.at("confusion");
        for (std::size_t i = 0; i < cm.size() && i < static_cast<std::size_t>(kNumGestures); ++i)
          for (std::size_t k = 0; k < cm[i].size() && k < static_cast<std::size_t>(kNumGestures); ++k)
            c.eval.confusion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = cm[i][k].get<int>();
      }
      for (const auto& fj : cj.at("folds")) {
        classify::FoldResult f;
        f.test_repetition = fj.at("test_repetition").get<int>();
        f.n_train = fj.at("n_train").get<std::size_t>();
        f.n_test = fj.at("n_test").get<std::size_t>();
        f.accuracy = fj.at("accuracy").get<double>();
        const auto& b = fj.at("best");
        f.best.family = c.family;
        if (c.family == classify::Family::Lda) {
          f.best.shrinkage = b.at("shrinkage").get<double>();
          f.best.tol = b.at("tol").get<double>();
        } else {
          f.best.C = b.at("C").get<double>();
          f.best.kernel = b.at("kernel").get<std::string>() == "rbf" ? classify::Kernel::Rbf : classify::Kernel::Linear;
        }
        for (const auto& v : fj.at("inner_accuracy"))
          f.inner_accuracy.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
        c.eval.folds.push_back(std::move(f));
      }
      s.cells.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("result file: ") + e.what());
  }
  return s;
}

}  // namespace hgr::pipeline
