// hgr: batch front-end. Subcommands share one output tree:
//
//   <out>/sessions/<id>/        raw sessions (synth)
//   <out>/cache/<stage>/<key>   content-addressed stage outputs
//   <out>/labels, preprocessed, features, quality, results, stats, report
//   <out>/run.json              resolved config + input hashes of the last run
//   <out>/stage_log.txt         computed / cached / failed per stage and session

#include <hgr/hgr.hpp>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Content hashes: git object framing ("blob <size>\0" + bytes, trees over
// sorted entries) with SHA-256.

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) { EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr); }
  void update(std::string_view s) { EVP_DigestUpdate(ctx_.get(), s.data(), s.size()); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::string sha256(std::string_view s) {
  Sha256 h;
  h.update(s);
  return h.hex();
}

std::string blob_hash(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) hgr::fail(hgr::ErrorCode::MissingFile, file.string());
  Sha256 h;
  const std::string header = "blob " + std::to_string(fs::file_size(file)) + '\0';
  h.update(header);
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return h.hex();
}

std::string tree_hash(const fs::path& dir) {
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  std::string body;
  for (const auto& p : entries) {
    const bool sub = fs::is_directory(p);
    body += (sub ? "tree " : "blob ") + p.filename().string() + '\0' + (sub ? tree_hash(p) : blob_hash(p)) + '\n';
  }
  return sha256("tree " + std::to_string(body.size()) + '\0' + body);
}

// ---------------------------------------------------------------------------

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) hgr::fail(hgr::ErrorCode::MissingFile, p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Write-then-rename so an interrupted run never leaves a half-written cache
/// entry behind.
void write_text(const fs::path& p, std::string_view content) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) hgr::fail(hgr::ErrorCode::MissingFile, "cannot write " + p.string());
    out << content;
    if (!out) hgr::fail(hgr::ErrorCode::MissingFile, "write failed: " + p.string());
  }
  fs::rename(tmp, p);
}

struct StageEvent {
  std::string stage, session, key, status;
};

struct SessionRef {
  std::string id;  // directory name
  fs::path manifest;
  std::string hash;
};

struct Context {
  hgr::RunConfig cfg;
  fs::path out;
  fs::path sessions;
  unsigned jobs = 1;
  std::string command;
  json inputs = json::object();

  fs::path cache(std::string_view stage, const std::string& key, std::string_view ext) const {
    return out / "cache" / stage / (key + std::string(ext));
  }
};

json pick(const json& j, std::initializer_list<const char*> keys) {
  json o = json::object();
  for (const char* k : keys) o[k] = j.at(k);
  return o;
}

std::string stage_key(std::string_view stage, const json& section, const std::string& input) {
  return sha256(std::string(stage) + '\n' + section.dump() + '\n' + input);
}

json label_section(const Context& c) {
  return pick(hgr::to_json(c.cfg.pipeline), {"filter", "smooth", "max_align_shift_s"});
}
json preprocess_section(const Context& c) { return pick(hgr::to_json(c.cfg.pipeline), {"filter", "smooth"}); }
json feature_section(const Context& c) {
  return pick(hgr::to_json(c.cfg.pipeline), {"filter", "smooth", "window", "thresholds", "max_align_shift_s"});
}
json eval_section(const Context& c) {
  json j = pick(hgr::to_json(c.cfg.pipeline),
                {"presets", "modalities", "families", "lda_grid", "svm_grid", "plan", "permute_labels"});
  if (c.cfg.pipeline.permute_labels) j["permute_seed"] = c.cfg.seed;
  return j;
}

std::vector<SessionRef> discover_sessions(Context& c) {
  if (!fs::is_directory(c.sessions)) hgr::fail(hgr::ErrorCode::MissingFile, "no session directory " + c.sessions.string());
  std::vector<SessionRef> out;
  for (const auto& e : fs::directory_iterator(c.sessions))
    if (e.is_directory() && fs::exists(e.path() / "manifest.json"))
      out.push_back({e.path().filename().string(), e.path() / "manifest.json", {}});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (auto& s : out) {
    s.hash = tree_hash(s.manifest.parent_path());
    c.inputs["sessions/" + s.id] = s.hash;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages. Each returns its result and appends to the session's own event
// list; lists are merged in session order afterwards so the log does not
// depend on scheduling.

json alignment_json(const hgr::AlignmentResult& a) {
  return {{"shift_s", a.shift_s}, {"shift_samples", a.shift_samples}, {"labels", hgr::to_json(a.track)}};
}

hgr::AlignmentResult alignment_from_json(const json& j) {
  hgr::AlignmentResult a;
  a.shift_s = j.at("shift_s").get<double>();
  a.shift_samples = j.at("shift_samples").get<long>();
  a.track = hgr::label_track_from_json(j.at("labels"));
  return a;
}

hgr::AlignmentResult stage_label(const Context& c, const SessionRef& s, std::vector<StageEvent>& log,
                                 const hgr::Session* loaded = nullptr) {
  const auto key = stage_key("label", label_section(c), s.hash);
  const auto path = c.cache("label", key, ".json");
  if (fs::exists(path)) {
    log.push_back({"label", s.id, key, "cached"});
    return alignment_from_json(json::parse(read_text(path)));
  }
  std::optional<hgr::Session> own;
  if (loaded == nullptr) loaded = &own.emplace(hgr::load_session_full(s.manifest));
  auto a = hgr::pipeline::session_alignment(loaded->recording, loaded->manifest.schedule, c.cfg.pipeline);
  write_text(path, alignment_json(a).dump(1) + "\n");
  log.push_back({"label", s.id, key, "computed"});
  return a;
}

std::string features_key(const Context& c, const SessionRef& s) { return stage_key("features", feature_section(c), s.hash); }

hgr::FeatureMatrix stage_features(const Context& c, const SessionRef& s, std::vector<StageEvent>& log) {
  const auto key = features_key(c, s);
  const auto path = c.cache("features", key, ".hgrf");
  if (fs::exists(path)) {
    log.push_back({"features", s.id, key, "cached"});
    return hgr::read_feature_cache(path);
  }
  const auto session = hgr::load_session_full(s.manifest);
  const auto sf = hgr::pipeline::session_features(session.recording, session.manifest.schedule, c.cfg.pipeline);
  // the alignment is a by-product; seed the label cache with it
  const auto label_path = c.cache("label", stage_key("label", label_section(c), s.hash), ".json");
  if (!fs::exists(label_path)) write_text(label_path, alignment_json(sf.alignment).dump(1) + "\n");
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  hgr::write_feature_cache(sf.matrix, tmp);
  fs::rename(tmp, path);
  log.push_back({"features", s.id, key, "computed"});
  return sf.matrix;
}

hgr::pipeline::SessionOutcome stage_eval(const Context& c, const SessionRef& s, std::vector<StageEvent>& log) {
  const auto key = stage_key("eval", eval_section(c), features_key(c, s));
  const auto path = c.cache("eval", key, ".json");
  if (fs::exists(path)) {
    log.push_back({"eval", s.id, key, "cached"});
    return hgr::pipeline::session_outcome_from_json(json::parse(read_text(path)));
  }
  hgr::pipeline::SessionOutcome o;
  try {
    const auto fm = stage_features(c, s, log);
    const auto manifest = hgr::read_manifest(s.manifest);
    o.participant_id = manifest.participant_id;
    o.posture = manifest.posture;
    const auto label_path = c.cache("label", stage_key("label", label_section(c), s.hash), ".json");
    if (fs::exists(label_path)) o.align_shift_s = json::parse(read_text(label_path)).at("shift_s").get<double>();
    o.cells = hgr::pipeline::evaluate_features(fm, c.cfg.pipeline);
  } catch (const hgr::Error& e) {
    o.cells.clear();
    o.error = std::string(hgr::to_string(e.code())) + ": " + e.what();
    if (o.participant_id.empty()) o.participant_id = s.id;
    log.push_back({"eval", s.id, key, "failed"});
    return o;
  }
  write_text(path, hgr::pipeline::to_json(o).dump(1) + "\n");
  log.push_back({"eval", s.id, key, "computed"});
  return o;
}

// ---------------------------------------------------------------------------

void flush_log(const Context& c, const std::vector<std::vector<StageEvent>>& logs) {
  std::string text;
  for (const auto& session : logs)
    for (const auto& e : session) text += c.command + "\t" + e.stage + "\t" + e.session + "\t" + e.status + "\t" + e.key.substr(0, 16) + "\n";
  std::cerr << text;
  fs::create_directories(c.out);
  std::ofstream(c.out / "stage_log.txt", std::ios::app) << text;
}

void write_run_json(const Context& c) {
  json cfg = hgr::to_json(c.cfg);
  cfg["paths"]["sessions"] = c.sessions.string();
  cfg["paths"]["out"] = c.out.string();
  const json run = {{"command", c.command}, {"config", cfg}, {"inputs", c.inputs}, {"jobs", c.jobs}};
  write_text(c.out / "run.json", run.dump(2) + "\n");
}

/// Runs fn per session with the worker pool; returns per-session event logs.
template <typename T>
std::vector<T> per_session(const Context& c, const std::vector<SessionRef>& sessions,
                           const std::function<T(const SessionRef&, std::vector<StageEvent>&)>& fn) {
  std::vector<std::vector<StageEvent>> logs(sessions.size());
  auto out = hgr::pipeline::parallel_map<T>(sessions.size(), c.jobs,
                                            [&](std::size_t i) { return fn(sessions[i], logs[i]); });
  flush_log(c, logs);
  return out;
}

struct Failure {
  std::string id, message;
};

int report_failures(const std::vector<Failure>& f) {
  for (const auto& x : f) std::cerr << "FAILED " << x.id << ": " << x.message << "\n";
  return f.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_synth(Context& c) {
  const auto& spec = c.cfg.synth;
  fs::create_directories(c.sessions);
  // replace previous sessions, but only directories that look like sessions
  for (const auto& e : fs::directory_iterator(c.sessions))
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) fs::remove_all(e.path());
  struct Job {
    int participant;
    hgr::Posture posture;
  };
  std::vector<Job> jobs;
  for (int p = 0; p < spec.n_participants; ++p)
    for (auto posture : {hgr::Posture::Deg90, hgr::Posture::Deg180}) jobs.push_back({p, posture});
  hgr::pipeline::parallel_map<int>(jobs.size(), c.jobs, [&](std::size_t i) {
    const auto s = hgr::synth::gen_session(spec, jobs[i].participant, jobs[i].posture);
    const fs::path dir = c.sessions / (s.recording.participant_id + "_" + std::string(hgr::to_string(jobs[i].posture)));
    hgr::save_session(s.recording, s.schedule, dir);
    write_text(dir / "truth.json",
               json{{"reaction_delay_s", s.reaction_delay_s}, {"labels", hgr::to_json(s.truth)}}.dump(1) + "\n");
    return 0;
  });
  std::cerr << "synth: wrote " << jobs.size() << " sessions to " << c.sessions << "\n";
  return 0;
}

int cmd_label(Context& c) {
  const auto sessions = discover_sessions(c);
  std::vector<Failure> failed;
  std::mutex m;
  per_session<int>(c, sessions, [&](const SessionRef& s, std::vector<StageEvent>& log) {
    try {
      const auto a = stage_label(c, s, log);
      write_text(c.out / "labels" / (s.id + ".json"), alignment_json(a).dump(1) + "\n");
    } catch (const hgr::Error& e) {
      log.push_back({"label", s.id, "", "failed"});
      std::lock_guard lock(m);
      failed.push_back({s.id, e.what()});
    }
    return 0;
  });
  return report_failures(failed);
}

int cmd_preprocess(Context& c) {
  const auto sessions = discover_sessions(c);
  std::vector<Failure> failed;
  std::mutex m;
  per_session<int>(c, sessions, [&](const SessionRef& s, std::vector<StageEvent>& log) {
    const auto key = stage_key("preprocess", preprocess_section(c), s.hash);
    const fs::path dir = c.out / "preprocessed" / s.id;
    const fs::path stamp = dir / "stage_key";
    try {
      if (fs::exists(stamp) && read_text(stamp) == key) {
        log.push_back({"preprocess", s.id, key, "cached"});
        return 0;
      }
      fs::remove_all(dir);
      const auto session = hgr::load_session_full(s.manifest);
      const auto pre = hgr::dsp::preprocess_recording(session.recording, c.cfg.pipeline.filter, c.cfg.pipeline.smooth);
      hgr::save_session(pre, session.manifest.schedule, dir);
      write_text(stamp, key);
      log.push_back({"preprocess", s.id, key, "computed"});
    } catch (const hgr::Error& e) {
      log.push_back({"preprocess", s.id, key, "failed"});
      std::lock_guard lock(m);
      failed.push_back({s.id, e.what()});
    }
    return 0;
  });
  return report_failures(failed);
}

int cmd_features(Context& c) {
  const auto sessions = discover_sessions(c);
  std::vector<Failure> failed;
  std::mutex m;
  json index = json::object();
  fs::create_directories(c.out / "features");
  per_session<int>(c, sessions, [&](const SessionRef& s, std::vector<StageEvent>& log) {
    try {
      const auto fm = stage_features(c, s, log);
      hgr::write_feature_csv(fm, c.out / "features" / (s.id + ".csv"));
      std::lock_guard lock(m);
      index[s.id] = fs::relative(c.cache("features", features_key(c, s), ".hgrf"), c.out).string();
    } catch (const hgr::Error& e) {
      log.push_back({"features", s.id, "", "failed"});
      std::lock_guard lock(m);
      failed.push_back({s.id, e.what()});
    }
    return 0;
  });
  write_text(c.out / "features" / "index.json", index.dump(1) + "\n");
  return report_failures(failed);
}

int cmd_quality(Context& c) {
  const auto sessions = discover_sessions(c);
  struct Item {
    std::optional<hgr::quality::NoiseReport> noise;
    std::optional<hgr::quality::ParticipantQuality> gestures;
    hgr::Posture posture = hgr::Posture::Deg90;
    std::string error;
  };
  hgr::quality::QualityOptions qopt;
  qopt.reference = c.cfg.snr_reference;
  qopt.stats = c.cfg.stats;
  const auto items = per_session<Item>(c, sessions, [&](const SessionRef& s, std::vector<StageEvent>& log) {
    Item it;
    try {
      const auto session = hgr::load_session_full(s.manifest);
      const auto& raw = session.recording;
      it.posture = raw.posture;
      if (raw.calibration_end_s > raw.calibration_start_s) it.noise = hgr::quality::noise_report(raw);
      const auto a = stage_label(c, s, log, &session);
      const auto pre = hgr::dsp::preprocess_recording(raw, c.cfg.pipeline.filter, c.cfg.pipeline.smooth);
      it.gestures = hgr::quality::participant_quality(pre, a.track, qopt);
    } catch (const hgr::Error& e) {
      it.error = e.what();
    }
    return it;
  });

  std::vector<Failure> failed;
  std::vector<hgr::quality::NoiseReport> noise;
  std::map<hgr::Posture, std::vector<hgr::quality::ParticipantQuality>> by_posture;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].error.empty()) {
      failed.push_back({sessions[i].id, items[i].error});
      continue;
    }
    if (items[i].noise) noise.push_back(*items[i].noise);
    by_posture[items[i].posture].push_back(*items[i].gestures);
  }
  const fs::path dir = c.out / "quality";
  write_text(dir / "noise.csv", hgr::quality::noise_csv(noise));
  json nj = json::array();
  for (const auto& n : noise) nj.push_back(hgr::quality::to_json(n));
  write_text(dir / "noise.json", nj.dump(1) + "\n");
  for (const auto& [posture, parts] : by_posture) {
    const auto rep = hgr::quality::aggregate_quality(parts, qopt);
    const std::string tag(hgr::to_string(posture));
    write_text(dir / ("gesture_quality_" + tag + ".csv"), hgr::quality::quality_csv(rep, c.cfg.stats.alpha));
    write_text(dir / ("gesture_quality_" + tag + ".json"), hgr::quality::to_json(rep).dump(1) + "\n");
  }
  return report_failures(failed);
}

int cmd_eval(Context& c) {
  const auto sessions = discover_sessions(c);
  const auto outcomes = per_session<hgr::pipeline::SessionOutcome>(
      c, sessions, [&](const SessionRef& s, std::vector<StageEvent>& log) { return stage_eval(c, s, log); });
  const fs::path dir = c.out / "results";
  fs::remove_all(dir);
  std::vector<Failure> failed;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    const auto& id = sessions[i].id;
    write_text(dir / (id + ".json"), hgr::pipeline::to_json(o).dump(1) + "\n");
    if (!o.ok()) {
      failed.push_back({id, o.error});
      continue;
    }
    for (const auto& cell : o.cells) {
      auto j = hgr::classify::to_json(cell.eval);
      j["participant_id"] = o.participant_id;
      j["posture"] = std::string(hgr::to_string(o.posture));
      j["preset"] = cell.preset;
      j["modality"] = std::string(hgr::pipeline::to_string(cell.modality));
      const std::string name = cell.preset + "_" + std::string(hgr::pipeline::to_string(cell.modality)) + "_" +
                               std::string(hgr::classify::to_string(cell.family)) + ".json";
      write_text(dir / id / name, j.dump(1) + "\n");
    }
  }
  return report_failures(failed);
}

std::vector<hgr::pipeline::SessionOutcome> load_results(Context& c) {
  const fs::path dir = c.out / "results";
  std::vector<fs::path> files;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) hgr::fail(hgr::ErrorCode::MissingResults, "no result files under " + dir.string());
  std::vector<hgr::pipeline::SessionOutcome> out;
  for (const auto& f : files) {
    c.inputs["results/" + f.filename().string()] = blob_hash(f);
    try {
      out.push_back(hgr::pipeline::session_outcome_from_json(json::parse(read_text(f))));
    } catch (const json::exception& e) {
      hgr::fail(hgr::ErrorCode::ParseError, f.string() + ": " + e.what());
    }
  }
  return out;
}

int cmd_stats(Context& c) {
  const auto rep = hgr::report::build_report(load_results(c), c.cfg.stats);
  const auto files = hgr::report::render(rep);
  write_text(c.out / "stats" / "hypotheses.json", files.hypotheses_json);
  write_text(c.out / "stats" / "hypotheses.md", files.hypotheses_md);
  return rep.failures.empty() ? 0 : 1;
}

int cmd_report(Context& c) {
  const auto rep = hgr::report::build_report(load_results(c), c.cfg.stats);
  const auto files = hgr::report::render(rep);
  const fs::path dir = c.out / "report";
  write_text(dir / "comparison.csv", files.comparison_csv);
  write_text(dir / "comparison.md", files.comparison_md);
  write_text(dir / "hypotheses.json", files.hypotheses_json);
  write_text(dir / "hypotheses.md", files.hypotheses_md);
  for (const auto& f : rep.failures) std::cerr << "FAILED " << f << "\n";
  return rep.failures.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hand-gesture EMG/IMU comparison pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  unsigned jobs = hgr::pipeline::default_jobs();
  std::optional<int> participants;
  app.add_option("--config", config_path, "JSON config (\"version\": 1)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "seed for synthesis and the permutation control");
  app.add_option("--jobs", jobs, "worker threads (participant level)")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "generate synthetic sessions (participants x 2 postures)");
  synth->add_option("-n,--participants", participants, "number of virtual participants");
  app.add_subcommand("label", "align cue labels to the EMG activity");
  app.add_subcommand("preprocess", "filter, smooth, detrend and upsample every channel");
  app.add_subcommand("features", "windowed feature matrices");
  app.add_subcommand("quality", "calibration noise and per-gesture SNR/SMR");
  app.add_subcommand("eval", "cross-validated accuracy per preset, modality and model family");
  app.add_subcommand("stats", "hypothesis tests over the eval results");
  app.add_subcommand("report", "comparison tables and hypothesis summary");

  CLI11_PARSE(app, argc, argv);

  Context c;
  c.command = app.get_subcommands().front()->get_name();
  c.out = out_dir;
  c.jobs = jobs;
  try {
    json j = {{"version", hgr::kConfigVersion}};
    if (!config_path.empty()) {
      try {
        j = json::parse(read_text(config_path));
      } catch (const json::exception& e) {
        hgr::fail(hgr::ErrorCode::ParseError, config_path + ": " + e.what());
      }
    }
    if (seed) j["seed"] = *seed;
    if (participants) j["synth"]["n_participants"] = *participants;
    c.cfg = hgr::run_config_from_json(j);
    c.sessions = c.cfg.sessions_dir.empty() ? c.out / "sessions" : fs::path(c.cfg.sessions_dir);
    fs::create_directories(c.out);

    int rc = 0;
    if (c.command == "synth") rc = cmd_synth(c);
    else if (c.command == "label") rc = cmd_label(c);
    else if (c.command == "preprocess") rc = cmd_preprocess(c);
    else if (c.command == "features") rc = cmd_features(c);
    else if (c.command == "quality") rc = cmd_quality(c);
    else if (c.command == "eval") rc = cmd_eval(c);
    else if (c.command == "stats") rc = cmd_stats(c);
    else if (c.command == "report") rc = cmd_report(c);
    write_run_json(c);
    return rc;
  } catch (const hgr::Error& e) {
    std::cerr << "error [" << hgr::to_string(e.code()) << "]: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  try {
    write_run_json(c);
  } catch (const std::exception&) {
  }
  return 2;
}
