#pragma once

#include <hgr/pipeline.hpp>
#include <hgr/quality.hpp>
#include <hgr/stats.hpp>
#include <hgr/synth/synth.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>

namespace hgr {

inline constexpr int kConfigVersion = 1;

/// Everything a batch run depends on. Paths are resolved by the front-end;
/// `seed` feeds both the generator and the label-permutation control.
struct RunConfig {
  std::string sessions_dir;  // empty: <out>/sessions
  std::uint64_t seed = 1;
  synth::SynthSpec synth = synth::SynthSpec::study_like();
  pipeline::PipelineConfig pipeline;
  stats::StatsOptions stats;
  quality::SnrReference snr_reference = quality::SnrReference::AdjacentRest;
};

namespace detail {

template <typename T>
void read_if(const nlohmann::json& o, const char* key, T& dst) {
  if (o.contains(key)) dst = o.at(key).get<T>();
}

inline classify::Grid grid_from_json(const nlohmann::json& arr, classify::Family fam) {
  classify::Grid g;
  for (const auto& p : arr) {
    classify::GridPoint gp;
    gp.family = fam;
    read_if(p, "shrinkage", gp.shrinkage);
    read_if(p, "tol", gp.tol);
    read_if(p, "C", gp.C);
    if (p.contains("kernel")) {
      const auto k = p.at("kernel").get<std::string>();
      if (k == "linear") gp.kernel = classify::Kernel::Linear;
      else if (k == "rbf") gp.kernel = classify::Kernel::Rbf;
      else fail(ErrorCode::ParseError, "unknown kernel '" + k + "'");
    }
    g.points.push_back(gp);
  }
  if (g.points.empty()) fail(ErrorCode::ParseError, "empty grid");
  return g;
}

inline nlohmann::json grid_to_json(const classify::Grid& g) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : g.points) {
    auto j = classify::to_json(p);
    j.erase("family");
    a.push_back(j);
  }
  return a;
}

}  // namespace detail

inline nlohmann::json to_json(const pipeline::PipelineConfig& c) {
  nlohmann::json mods = nlohmann::json::array(), fams = nlohmann::json::array();
  for (auto m : c.modalities) mods.push_back(std::string(pipeline::to_string(m)));
  for (auto f : c.families) fams.push_back(std::string(classify::to_string(f)));
  return {{"filter",
           {{"notch_hz", c.filter.notch_hz},
            {"notch_q", c.filter.notch_q},
            {"band_lo_hz", c.filter.band_lo_hz},
            {"band_hi_hz", c.filter.band_hi_hz},
            {"band_order", c.filter.band_order},
            {"zero_phase", c.filter.zero_phase}}},
          {"smooth", {{"window_samples", c.smooth.window_samples}}},
          {"window", {{"length_s", c.window.length_s}, {"step_s", c.window.step_s}}},
          {"thresholds",
           {{"zc_eps", c.thresholds.zc_eps},
            {"ssc_eps", c.thresholds.ssc_eps},
            {"myop_thresh", c.thresholds.myop_thresh},
            {"wamp_thresh", c.thresholds.wamp_thresh},
            {"hist_range_sigmas", c.thresholds.hist_range_sigmas},
            {"fr_split_hz", c.thresholds.fr_split_hz},
            {"psr_halfwidth_hz", c.thresholds.psr_halfwidth_hz}}},
          {"max_align_shift_s", c.max_align_shift_s},
          {"presets", c.preset_names()},
          {"modalities", mods},
          {"families", fams},
          {"lda_grid", detail::grid_to_json(c.lda_grid)},
          {"svm_grid", detail::grid_to_json(c.svm_grid)},
          {"plan", {{"folds", c.plan.folds}, {"svm_eps", c.plan.svm_eps}, {"svm_max_iter", c.plan.svm_max_iter}}},
          {"permute_labels", c.permute_labels}};
}

inline pipeline::PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  using detail::read_if;
  pipeline::PipelineConfig c;
  if (j.contains("filter")) {
    const auto& f = j["filter"];
    read_if(f, "notch_hz", c.filter.notch_hz);
    read_if(f, "notch_q", c.filter.notch_q);
    read_if(f, "band_lo_hz", c.filter.band_lo_hz);
    read_if(f, "band_hi_hz", c.filter.band_hi_hz);
    read_if(f, "band_order", c.filter.band_order);
    read_if(f, "zero_phase", c.filter.zero_phase);
  }
  if (j.contains("smooth")) read_if(j["smooth"], "window_samples", c.smooth.window_samples);
  if (j.contains("window")) {
    read_if(j["window"], "length_s", c.window.length_s);
    read_if(j["window"], "step_s", c.window.step_s);
    c.window.validate();
  }
  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    read_if(t, "zc_eps", c.thresholds.zc_eps);
    read_if(t, "ssc_eps", c.thresholds.ssc_eps);
    read_if(t, "myop_thresh", c.thresholds.myop_thresh);
    read_if(t, "wamp_thresh", c.thresholds.wamp_thresh);
    read_if(t, "hist_range_sigmas", c.thresholds.hist_range_sigmas);
    read_if(t, "fr_split_hz", c.thresholds.fr_split_hz);
    read_if(t, "psr_halfwidth_hz", c.thresholds.psr_halfwidth_hz);
  }
  read_if(j, "max_align_shift_s", c.max_align_shift_s);
  if (j.contains("presets")) {
    c.presets = j["presets"].get<std::vector<std::string>>();
    for (const auto& p : c.presets) pipeline::find_preset(p);  // throws on unknown names
  }
  if (j.contains("modalities")) {
    c.modalities.clear();
    for (const auto& m : j["modalities"]) {
      const auto v = pipeline::parse_modality_set(m.get<std::string>());
      if (!v) fail(ErrorCode::ParseError, "unknown modality '" + m.get<std::string>() + "'");
      c.modalities.push_back(*v);
    }
  }
  if (j.contains("families")) {
    c.families.clear();
    for (const auto& f : j["families"]) {
      const auto v = classify::parse_family(f.get<std::string>());
      if (!v) fail(ErrorCode::ParseError, "unknown model family '" + f.get<std::string>() + "'");
      c.families.push_back(*v);
    }
  }
  if (j.contains("lda_grid")) c.lda_grid = detail::grid_from_json(j["lda_grid"], classify::Family::Lda);
  if (j.contains("svm_grid")) c.svm_grid = detail::grid_from_json(j["svm_grid"], classify::Family::Svm);
  if (j.contains("plan")) {
    read_if(j["plan"], "folds", c.plan.folds);
    read_if(j["plan"], "svm_eps", c.plan.svm_eps);
    read_if(j["plan"], "svm_max_iter", c.plan.svm_max_iter);
  }
  read_if(j, "permute_labels", c.permute_labels);
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"version", kConfigVersion},
          {"seed", c.seed},
          {"paths", {{"sessions", c.sessions_dir}}},
          {"synth", synth::to_json(c.synth)},
          {"pipeline", to_json(c.pipeline)},
          {"stats", {{"alpha", c.stats.alpha}, {"normality_alpha", c.stats.normality_alpha}, {"paired", c.stats.paired}}},
          {"quality",
           {{"snr_reference", c.snr_reference == quality::SnrReference::AdjacentRest ? "adjacent_rest" : "calibration"}}}};
}

/// Parses a versioned config; absent sections keep defaults. The top-level
/// seed overrides synth.seed and seeds the permutation control.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (!j.contains("version")) fail(ErrorCode::ParseError, "config lacks \"version\"");
    if (j.at("version").get<int>() != kConfigVersion)
      fail(ErrorCode::ParseError, "unsupported config version " + j.at("version").dump());
    if (j.contains("synth")) c.synth = synth::synth_spec_from_json(j["synth"]);
    c.seed = c.synth.seed;
    detail::read_if(j, "seed", c.seed);
    if (j.contains("paths")) detail::read_if(j["paths"], "sessions", c.sessions_dir);
    if (j.contains("pipeline")) c.pipeline = pipeline_config_from_json(j["pipeline"]);
    if (j.contains("stats")) {
      detail::read_if(j["stats"], "alpha", c.stats.alpha);
      detail::read_if(j["stats"], "normality_alpha", c.stats.normality_alpha);
      detail::read_if(j["stats"], "paired", c.stats.paired);
    }
    if (j.contains("quality") && j["quality"].contains("snr_reference")) {
      const auto r = j["quality"]["snr_reference"].get<std::string>();
      if (r == "adjacent_rest") c.snr_reference = quality::SnrReference::AdjacentRest;
      else if (r == "calibration") c.snr_reference = quality::SnrReference::Calibration;
      else fail(ErrorCode::ParseError, "unknown snr_reference '" + r + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  c.synth.seed = c.seed;
  c.pipeline.permute_seed = c.seed;
  c.synth.validate();
  return c;
}

}  // namespace hgr
