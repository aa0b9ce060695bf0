#pragma once

#include <hgr/pipeline.hpp>
#include <hgr/stats.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

namespace hgr::report {

using pipeline::ModalitySet;

/// One table row: a (family, posture, placement preset) cell aggregated over
/// participants.
struct ReportRow {
  classify::Family family = classify::Family::Lda;
  Posture posture = Posture::Deg90;
  std::string preset;
  std::vector<std::string> participants;
  std::map<ModalitySet, std::vector<double>> accuracy;  // parallel to participants
  std::map<ModalitySet, std::vector<double>> dbi;
  std::vector<stats::TestResult> hypotheses;  // emg vs each other modality present
  std::optional<stats::TestResult> dbi_test;   // emg vs imu_combined on DBI
};

struct ComparisonReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> failures;  // "participant/posture: error"
  stats::StatsOptions options;
};

struct MeanStd {
  double mean = 0.0, std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  m.mean = stats::mean(v);
  m.std = v.size() < 2 ? 0.0 : stats::sample_std(v);
  return m;
}

/// Reported effect size: positive when the IMU-side group is better.
/// Accuracy: right - left. DBI (lower is better): left - right.
inline double reported_d(const stats::TestResult& t) { return -t.cohens_d; }

namespace detail {

inline stats::TestResult hypothesis_for(ModalitySet right, const stats::SampleGroup& emg,
                                        const stats::SampleGroup& other, const stats::StatsOptions& opt) {
  auto r = stats::compare_groups(emg, other, opt);
  for (auto h : stats::kAllHypotheses)
    if (stats::hypothesis_right(h) == pipeline::to_string(right)) r.id = std::string(stats::to_string(h));
  return r;
}

}  // namespace detail

inline ComparisonReport build_report(const std::vector<pipeline::SessionOutcome>& sessions,
                                     const stats::StatsOptions& opt = {}) {
  if (sessions.empty()) fail(ErrorCode::MissingResults, "no evaluation results");
  ComparisonReport rep;
  rep.options = opt;

  using Key = std::tuple<classify::Family, Posture, std::string>;
  // key -> participant -> modality -> (accuracy, dbi)
  std::map<Key, std::map<std::string, std::map<ModalitySet, std::pair<double, double>>>> cells;
  std::vector<std::string> preset_order;
  for (const auto& s : sessions) {
    if (!s.ok()) {
      rep.failures.push_back(s.participant_id + "/" + std::string(to_string(s.posture)) + ": " + s.error);
      continue;
    }
    for (const auto& c : s.cells) {
      if (std::find(preset_order.begin(), preset_order.end(), c.preset) == preset_order.end())
        preset_order.push_back(c.preset);
      cells[{c.family, s.posture, c.preset}][s.participant_id][c.modality] = {c.eval.mean_accuracy, c.eval.dbi};
    }
  }
  if (cells.empty()) fail(ErrorCode::MissingResults, "no successful evaluation results");

  auto preset_rank = [&](const std::string& p) {
    const auto& all = pipeline::placement_presets();
    for (std::size_t i = 0; i < all.size(); ++i)
      if (all[i].name == p) return i;
    return all.size();
  };
  std::vector<Key> keys;
  for (const auto& [k, v] : cells) keys.push_back(k);
  std::sort(keys.begin(), keys.end(), [&](const Key& a, const Key& b) {
    return std::make_tuple(std::get<0>(a), std::get<1>(a), preset_rank(std::get<2>(a)), std::get<2>(a)) <
           std::make_tuple(std::get<0>(b), std::get<1>(b), preset_rank(std::get<2>(b)), std::get<2>(b));
  });

  for (const auto& key : keys) {
    const auto& by_participant = cells.at(key);
    ReportRow row;
    row.family = std::get<0>(key);
    row.posture = std::get<1>(key);
    row.preset = std::get<2>(key);
    std::set<ModalitySet> present;
    for (const auto& [pid, mods] : by_participant)
      for (const auto& [m, v] : mods) present.insert(m);
    for (const auto& [pid, mods] : by_participant) {
      bool complete = true;
      for (auto m : present) complete = complete && mods.contains(m);
      if (!complete) continue;
      row.participants.push_back(pid);
      for (const auto& [m, v] : mods) {
        row.accuracy[m].push_back(v.first);
        row.dbi[m].push_back(v.second);
      }
    }
    if (present.contains(ModalitySet::Emg)) {
      const stats::SampleGroup emg{"emg", row.accuracy[ModalitySet::Emg], row.participants};
      for (auto m : present) {
        if (m == ModalitySet::Emg) continue;
        row.hypotheses.push_back(
            detail::hypothesis_for(m, emg, {std::string(pipeline::to_string(m)), row.accuracy[m], row.participants}, opt));
      }
      if (present.contains(ModalitySet::ImuCombined)) {
        const auto& de = row.dbi[ModalitySet::Emg];
        const auto& di = row.dbi[ModalitySet::ImuCombined];
        const bool finite = std::all_of(de.begin(), de.end(), [](double v) { return std::isfinite(v); }) &&
                            std::all_of(di.begin(), di.end(), [](double v) { return std::isfinite(v); });
        if (finite) {
          // lower DBI is better, so the IMU side takes the "left" slot
          auto t = stats::compare_groups({"imu_combined_dbi", di, row.participants}, {"emg_dbi", de, row.participants}, opt);
          t.id = "DBI";
          row.dbi_test = t;
        }
      }
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string cell(const std::vector<double>& v, int digits = 2) {
  if (v.empty()) return "-";
  const auto m = mean_std(v);
  return fixed(m.mean, digits) + "(" + fixed(m.std, digits) + ")";
}

inline std::string star(const stats::TestResult& t, double alpha) {
  if (t.status == stats::TestStatus::TooFewSamples) return "n/a";
  return t.p_value < alpha ? "*" : "ns";
}

inline const stats::TestResult* find_test(const ReportRow& r, ModalitySet m) {
  for (const auto& t : r.hypotheses)
    if (t.right == pipeline::to_string(m)) return &t;
  return nullptr;
}

inline const ReportRow* find_row(const ComparisonReport& rep, classify::Family f, Posture p, const std::string& preset) {
  for (const auto& r : rep.rows)
    if (r.family == f && r.posture == p && r.preset == preset) return &r;
  return nullptr;
}

}  // namespace detail

inline std::string comparison_csv(const ComparisonReport& rep) {
  using detail::fixed;
  std::string out = "family,posture,preset,n";
  for (auto m : pipeline::kAllModalitySets) {
    const std::string n(pipeline::to_string(m));
    out += "," + n + "_acc_mean," + n + "_acc_std," + n + "_dbi_mean," + n + "_dbi_std";
  }
  for (auto h : stats::kAllHypotheses) {
    const std::string n(stats::to_string(h));
    out += "," + n + "_test," + n + "_p," + n + "_star," + n + "_d," + n + "_decision," + n + "_status";
  }
  out += ",dbi_test,dbi_p,dbi_star,dbi_d\n";
  const double alpha = rep.options.alpha;
  for (const auto& r : rep.rows) {
    out += std::string(classify::to_string(r.family)) + "," + std::string(to_string(r.posture)) + "," + r.preset + "," +
           std::to_string(r.participants.size());
    for (auto m : pipeline::kAllModalitySets) {
      if (!r.accuracy.contains(m)) {
        out += ",,,,";
        continue;
      }
      const auto a = mean_std(r.accuracy.at(m));
      const auto d = mean_std(r.dbi.at(m));
      out += "," + fixed(a.mean, 6) + "," + fixed(a.std, 6) + "," + fixed(d.mean, 6) + "," + fixed(d.std, 6);
    }
    for (auto h : stats::kAllHypotheses) {
      const stats::TestResult* t = nullptr;
      for (const auto& x : r.hypotheses)
        if (x.id == stats::to_string(h)) t = &x;
      if (!t) {
        out += ",,,,,,";
        continue;
      }
      out += "," + std::string(stats::to_string(t->test_used)) + "," + fixed(t->p_value, 6) + "," +
             detail::star(*t, alpha) + "," + fixed(reported_d(*t), 4) + "," + (t->reject ? "reject" : "fail_to_reject") +
             "," + std::string(stats::to_string(t->status));
    }
    if (r.dbi_test)
      out += "," + std::string(stats::to_string(r.dbi_test->test_used)) + "," + fixed(r.dbi_test->p_value, 6) + "," +
             detail::star(*r.dbi_test, alpha) + "," + fixed(reported_d(*r.dbi_test), 4);
    else
      out += ",,,,";
    out += '\n';
  }
  return out;
}

/// EMG vs IMU-combined per placement preset, one table per posture, with
/// LDA, SVM and DBI column groups. Further tables list every modality.
inline std::string comparison_markdown(const ComparisonReport& rep) {
  const double alpha = rep.options.alpha;
  std::set<Posture> postures;
  std::set<classify::Family> families;
  std::vector<std::string> presets;
  for (const auto& r : rep.rows) {
    postures.insert(r.posture);
    families.insert(r.family);
    if (std::find(presets.begin(), presets.end(), r.preset) == presets.end()) presets.push_back(r.preset);
  }
  std::string out = "# Classification accuracy: EMG vs IMU\n\n";
  out += "Cells are mean(std) across participants. `*` marks p < " + detail::fixed(alpha, 2) +
         "; d is Cohen's d, positive when the IMU side is better (higher accuracy, lower DBI).\n";
  for (auto posture : postures) {
    out += "\n## EMG vs IMU-combined, " + std::string(to_string(posture)) + "\n\n";
    out += "| placement |";
    for (auto f : families) {
      const std::string F = f == classify::Family::Lda ? "LDA" : "SVM";
      out += " " + F + " EMG | " + F + " IMU | p | d |";
    }
    out += " DBI EMG | DBI IMU | p | d |\n|---|";
    for (std::size_t i = 0; i < families.size() + 1; ++i) out += "---|---|---|---|";
    out += "\n";
    for (const auto& preset : presets) {
      out += "| " + preset + " |";
      const ReportRow* any = nullptr;
      for (auto f : families) {
        const auto* r = detail::find_row(rep, f, posture, preset);
        if (!r) {
          out += " - | - | - | - |";
          continue;
        }
        any = any ? any : r;
        const auto* t = detail::find_test(*r, ModalitySet::ImuCombined);
        const auto get = [&](ModalitySet m) { return r->accuracy.contains(m) ? r->accuracy.at(m) : std::vector<double>{}; };
        out += " " + detail::cell(get(ModalitySet::Emg)) + " | " + detail::cell(get(ModalitySet::ImuCombined)) + " | " +
               (t ? detail::star(*t, alpha) : "-") + " | " + (t ? detail::fixed(reported_d(*t), 2) : "-") + " |";
      }
      if (any && any->dbi.contains(ModalitySet::Emg) && any->dbi.contains(ModalitySet::ImuCombined)) {
        const auto& t = any->dbi_test;
        out += " " + detail::cell(any->dbi.at(ModalitySet::Emg)) + " | " + detail::cell(any->dbi.at(ModalitySet::ImuCombined)) +
               " | " + (t ? detail::star(*t, alpha) : "-") + " | " + (t ? detail::fixed(reported_d(*t), 2) : "-") + " |\n";
      } else {
        out += " - | - | - | - |\n";
      }
    }
  }
  for (auto f : families)
    for (auto posture : postures) {
      out += "\n## All modalities, " + std::string(f == classify::Family::Lda ? "LDA" : "SVM") + ", " +
             std::string(to_string(posture)) + "\n\n| placement | n |";
      for (auto m : pipeline::kAllModalitySets) out += " " + std::string(pipeline::to_string(m)) + " |";
      for (auto h : stats::kAllHypotheses) out += " " + std::string(stats::to_string(h)) + " |";
      out += "\n|---|---|";
      for (std::size_t i = 0; i < pipeline::kAllModalitySets.size() + stats::kAllHypotheses.size(); ++i) out += "---|";
      out += "\n";
      for (const auto& preset : presets) {
        const auto* r = detail::find_row(rep, f, posture, preset);
        if (!r) continue;
        out += "| " + preset + " | " + std::to_string(r->participants.size()) + " |";
        for (auto m : pipeline::kAllModalitySets)
          out += " " + (r->accuracy.contains(m) ? detail::cell(r->accuracy.at(m)) : std::string("-")) + " |";
        for (auto h : stats::kAllHypotheses) {
          std::string v = "-";
          for (const auto& t : r->hypotheses)
            if (t.id == stats::to_string(h))
              v = std::string(t.reject ? "reject" : "keep") + " " + detail::star(t, alpha) + " d=" + detail::fixed(reported_d(t), 2);
          out += " " + v + " |";
        }
        out += "\n";
      }
    }
  if (!rep.failures.empty()) {
    out += "\n## Failed sessions\n\n";
    for (const auto& f : rep.failures) out += "- " + f + "\n";
  }
  return out;
}

inline nlohmann::json hypotheses_json(const ComparisonReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    nlohmann::json tests = nlohmann::json::array();
    for (const auto& t : r.hypotheses) {
      auto j = stats::to_json(t);
      j["reported_d"] = std::isfinite(reported_d(t)) ? nlohmann::json(reported_d(t)) : nlohmann::json(nullptr);
      tests.push_back(std::move(j));
    }
    nlohmann::json row = {{"family", std::string(classify::to_string(r.family))},
                          {"posture", std::string(to_string(r.posture))},
                          {"preset", r.preset},
                          {"participants", r.participants},
                          {"tests", tests}};
    if (r.dbi_test) row["dbi_test"] = stats::to_json(*r.dbi_test);
    rows.push_back(std::move(row));
  }
  return {{"alpha", rep.options.alpha},
          {"normality_alpha", rep.options.normality_alpha},
          {"paired", rep.options.paired},
          {"rows", rows},
          {"failures", rep.failures}};
}

inline std::string hypotheses_markdown(const ComparisonReport& rep) {
  const double alpha = rep.options.alpha;
  std::string out = "# Hypotheses (EMG >= modality)\n\n"
                    "`*` p < " + detail::fixed(alpha, 2) + ". Decision `reject` means EMG is significantly worse.\n\n"
                    "| family | posture | preset | hypothesis | modality | test | p | | d | decision |\n"
                    "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rep.rows)
    for (const auto& t : r.hypotheses)
      out += "| " + std::string(classify::to_string(r.family)) + " | " + std::string(to_string(r.posture)) + " | " + r.preset +
             " | " + t.id + " | " + t.right + " | " + std::string(stats::to_string(t.test_used)) + " | " +
             detail::fixed(t.p_value, 4) + " | " + detail::star(t, alpha) + " | " + detail::fixed(reported_d(t), 2) + " | " +
             (t.status == stats::TestStatus::Ok ? (t.reject ? "reject" : "fail_to_reject") : std::string(stats::to_string(t.status))) +
             " |\n";
  return out;
}

struct ReportFiles {
  std::string comparison_csv, comparison_md, hypotheses_json, hypotheses_md;
};

inline ReportFiles render(const ComparisonReport& rep) {
  return {comparison_csv(rep), comparison_markdown(rep), hypotheses_json(rep).dump(2) + "\n", hypotheses_markdown(rep)};
}

}  // namespace hgr::report
