#pragma once

#include <hgr/core.hpp>

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace hgr {

namespace fs = std::filesystem;

struct SensorFiles {
  Placement placement = Placement::W1;
  std::string emg_file;  // split form
  std::string imu_file;  // split form
  std::string file;      // combined form (used when emg_file/imu_file are empty)
};

struct SessionManifest {
  std::string participant_id;
  Posture posture = Posture::Deg90;
  std::vector<SensorFiles> sensors;
  double emg_rate_hz = kEmgRateHz;
  double imu_rate_hz = kImuRateHz;
  ScheduleParams schedule;
};

inline constexpr std::string_view kImuColumns[] = {"ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"};

// ---------------------------------------------------------------------------
// Number formatting / parsing
// ---------------------------------------------------------------------------

namespace detail {

inline void append_number(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorCode::InvalidArgument, "write failed for " + path.string());
}

/// Minimal CSV table: header names plus columns of doubles; empty cells are NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(std::string_view name, const std::string& origin) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return columns[i];
    fail(ErrorCode::ParseError, origin + ": missing column '" + std::string(name) + "'");
  }
};

inline CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable t;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    line = std::string_view(text).substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    return true;
  };
  std::string_view line;
  if (!next_line(line)) fail(ErrorCode::ParseError, origin + ": empty file");
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    t.header.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  t.columns.resize(t.header.size());
  std::size_t row = 1;
  while (next_line(line)) {
    ++row;
    if (line.empty()) continue;
    std::size_t col = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      const char* cell_end = std::find(p, end, ',');
      if (col >= t.header.size())
        fail(ErrorCode::ParseError, origin + ": too many cells on row " + std::to_string(row));
      double v = std::numeric_limits<double>::quiet_NaN();
      if (cell_end != p) {
        auto [ptr, ec] = std::from_chars(p, cell_end, v);
        if (ec != std::errc() || ptr != cell_end)
          fail(ErrorCode::ParseError, origin + ": bad number on row " + std::to_string(row));
      }
      t.columns[col++].push_back(v);
      if (cell_end == end) break;
      p = cell_end + 1;
    }
    if (col != t.header.size())
      fail(ErrorCode::ParseError, origin + ": too few cells on row " + std::to_string(row));
  }
  return t;
}

/// Checks that timestamps advance at the declared rate; returns the samples
/// in file order. `t` and `v` are parallel and may contain NaN gaps that
/// are skipped together.
inline std::vector<double> validated_samples(const std::vector<double>& t, const std::vector<double>& v,
                                             double declared_hz, const std::string& origin) {
  std::vector<double> ts, out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) continue;
    if (std::isnan(t[i])) fail(ErrorCode::ParseError, origin + ": sample without timestamp");
    ts.push_back(t[i]);
    out.push_back(v[i]);
  }
  if (out.size() >= 2) {
    const double inferred = static_cast<double>(ts.size() - 1) / (ts.back() - ts.front());
    if (!(std::abs(inferred - declared_hz) <= 0.01 * declared_hz))
      fail(ErrorCode::RateMismatch, origin + ": declared " + std::to_string(declared_hz) +
                                        " Hz, timestamps imply " + std::to_string(inferred) + " Hz");
    const double dt = 1.0 / declared_hz;
    for (std::size_t i = 0; i < ts.size(); ++i)
      if (std::abs(ts[i] - ts.front() - static_cast<double>(i) * dt) > 0.5 * dt)
        fail(ErrorCode::RateMismatch, origin + ": irregular timestamp at sample " + std::to_string(i));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ScheduleParams& s) {
  return {{"gesture_s", s.gesture_s},   {"rest_s", s.rest_s},
          {"reps", s.reps},             {"n_gestures", s.n_gestures},
          {"pre_gesture_rest_s", s.pre_gesture_rest_s}, {"calibration_s", s.calibration_s}};
}

inline ScheduleParams schedule_from_json(const nlohmann::json& j) {
  ScheduleParams s;
  s.gesture_s = j.value("gesture_s", s.gesture_s);
  s.rest_s = j.value("rest_s", s.rest_s);
  s.reps = j.value("reps", s.reps);
  s.n_gestures = j.value("n_gestures", s.n_gestures);
  s.pre_gesture_rest_s = j.value("pre_gesture_rest_s", s.pre_gesture_rest_s);
  s.calibration_s = j.value("calibration_s", s.calibration_s);
  s.validate();
  return s;
}

inline SessionManifest read_manifest(const fs::path& path) {
  const std::string text = detail::read_file(path);
  SessionManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.participant_id = j.at("participant_id").get<std::string>();
    const auto posture = parse_posture(j.at("posture").get<std::string>());
    if (!posture) fail(ErrorCode::ParseError, path.string() + ": posture must be \"90\" or \"180\"");
    m.posture = *posture;
    if (j.contains("rates")) {
      m.emg_rate_hz = j["rates"].value("emg_hz", m.emg_rate_hz);
      m.imu_rate_hz = j["rates"].value("imu_hz", m.imu_rate_hz);
    }
    for (const auto& s : j.at("sensors")) {
      SensorFiles f;
      const auto p = parse_placement(s.at("placement").get<std::string>());
      if (!p) fail(ErrorCode::ParseError, path.string() + ": unknown placement");
      f.placement = *p;
      f.emg_file = s.value("emg_file", "");
      f.imu_file = s.value("imu_file", "");
      f.file = s.value("file", "");
      m.sensors.push_back(f);
    }
    m.schedule = schedule_from_json(j.at("schedule"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return m;
}

inline nlohmann::json to_json(const SessionManifest& m) {
  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& s : m.sensors) {
    nlohmann::json e{{"placement", std::string(to_string(s.placement))}};
    if (!s.emg_file.empty()) e["emg_file"] = s.emg_file;
    if (!s.imu_file.empty()) e["imu_file"] = s.imu_file;
    if (!s.file.empty()) e["file"] = s.file;
    sensors.push_back(e);
  }
  return {{"participant_id", m.participant_id},
          {"posture", std::string(to_string(m.posture))},
          {"rates", {{"emg_hz", m.emg_rate_hz}, {"imu_hz", m.imu_rate_hz}}},
          {"sensors", sensors},
          {"schedule", to_json(m.schedule)}};
}

inline nlohmann::json to_json(const LabelTrack& t) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& s : t.segments) {
    const char* kind = s.kind == SegmentKind::Gesture ? "gesture" : s.kind == SegmentKind::Rest ? "rest" : "calibration";
    a.push_back({{"start_s", s.start_s}, {"end_s", s.end_s}, {"kind", kind}, {"gesture", s.gesture},
                 {"repetition", s.repetition}});
  }
  return a;
}

inline LabelTrack label_track_from_json(const nlohmann::json& j) {
  LabelTrack t;
  try {
    for (const auto& e : j) {
      Segment s;
      s.start_s = e.at("start_s").get<double>();
      s.end_s = e.at("end_s").get<double>();
      const auto kind = e.at("kind").get<std::string>();
      if (kind == "gesture") s.kind = SegmentKind::Gesture;
      else if (kind == "rest") s.kind = SegmentKind::Rest;
      else if (kind == "calibration") s.kind = SegmentKind::Calibration;
      else fail(ErrorCode::ParseError, "unknown segment kind '" + kind + "'");
      s.gesture = e.value("gesture", -1);
      s.repetition = e.value("repetition", -1);
      t.segments.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("label track: ") + e.what());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Session load / save
// ---------------------------------------------------------------------------

struct Session {
  SessionManifest manifest;
  Recording recording;
};

inline Session load_session_full(const fs::path& manifest_path) {
  Session s;
  s.manifest = read_manifest(manifest_path);
  const auto& m = s.manifest;
  const fs::path dir = manifest_path.parent_path();
  Recording& rec = s.recording;
  rec.participant_id = m.participant_id;
  rec.posture = m.posture;
  rec.calibration_start_s = 0.0;
  rec.calibration_end_s = m.schedule.calibration_s;

  auto add = [&](Placement p, ChannelKind k, double rate, std::vector<double> samples) {
    if (rec.find(p, k) != nullptr)
      fail(ErrorCode::DuplicateChannel, std::string(to_string(p)) + "/" + std::string(to_string(k)));
    rec.channels.push_back({p, k, rate, std::move(samples)});
  };

  for (const auto& sensor : m.sensors) {
    if (!sensor.emg_file.empty() || !sensor.imu_file.empty()) {
      if (!sensor.emg_file.empty()) {
        const auto path = dir / sensor.emg_file;
        const auto t = detail::parse_csv(detail::read_file(path), path.string());
        add(sensor.placement, ChannelKind::Emg, m.emg_rate_hz,
            detail::validated_samples(t.column("t_s", path.string()), t.column("emg_uV", path.string()),
                                      m.emg_rate_hz, path.string()));
      }
      if (!sensor.imu_file.empty()) {
        const auto path = dir / sensor.imu_file;
        const auto t = detail::parse_csv(detail::read_file(path), path.string());
        for (std::size_t a = 0; a < kImuKinds.size(); ++a)
          add(sensor.placement, kImuKinds[a], m.imu_rate_hz,
              detail::validated_samples(t.column("t_s", path.string()),
                                        t.column(kImuColumns[a], path.string()), m.imu_rate_hz,
                                        path.string()));
      }
    } else if (!sensor.file.empty()) {
      const auto path = dir / sensor.file;
      const auto t = detail::parse_csv(detail::read_file(path), path.string());
      const auto& ts = t.column("t_s", path.string());
      add(sensor.placement, ChannelKind::Emg, m.emg_rate_hz,
          detail::validated_samples(ts, t.column("emg_uV", path.string()), m.emg_rate_hz, path.string()));
      for (std::size_t a = 0; a < kImuKinds.size(); ++a)
        add(sensor.placement, kImuKinds[a], m.imu_rate_hz,
            detail::validated_samples(ts, t.column(kImuColumns[a], path.string()), m.imu_rate_hz,
                                      path.string()));
    } else {
      fail(ErrorCode::ParseError, "sensor entry without files");
    }
  }
  rec.validate();
  return s;
}

inline Recording load_session(const fs::path& manifest_path) {
  return load_session_full(manifest_path).recording;
}

/// Writes the canonical split form: manifest.json plus <placement>_emg.csv
/// and <placement>_imu.csv for each placement present. Channels of one
/// file must share a rate.
inline SessionManifest save_session(const Recording& rec, const ScheduleParams& schedule,
                                    const fs::path& dir) {
  fs::create_directories(dir);
  SessionManifest m;
  m.participant_id = rec.participant_id;
  m.posture = rec.posture;
  m.schedule = schedule;
  for (auto p : kAllPlacements) {
    const Channel* emg = rec.find(p, ChannelKind::Emg);
    std::vector<const Channel*> imu;
    for (auto k : kImuKinds) imu.push_back(rec.find(p, k));
    const bool has_imu = std::any_of(imu.begin(), imu.end(), [](auto* c) { return c != nullptr; });
    if (emg == nullptr && !has_imu) continue;
    SensorFiles f;
    f.placement = p;
    if (emg != nullptr) {
      m.emg_rate_hz = emg->rate_hz;
      f.emg_file = std::string(to_string(p)) + "_emg.csv";
      std::string out = "t_s,emg_uV\n";
      out.reserve(emg->samples.size() * 24);
      for (std::size_t i = 0; i < emg->samples.size(); ++i) {
        detail::append_number(out, static_cast<double>(i) / emg->rate_hz);
        out += ',';
        detail::append_number(out, emg->samples[i]);
        out += '\n';
      }
      detail::write_file(dir / f.emg_file, out);
    }
    if (has_imu) {
      if (std::any_of(imu.begin(), imu.end(), [](auto* c) { return c == nullptr; }))
        fail(ErrorCode::InvalidArgument, "IMU files need all nine axes");
      const double rate = imu[0]->rate_hz;
      m.imu_rate_hz = rate;
      f.imu_file = std::string(to_string(p)) + "_imu.csv";
      std::string out = "t_s,ax,ay,az,gx,gy,gz,mx,my,mz\n";
      const std::size_t n = imu[0]->samples.size();
      out.reserve(n * 200);
      for (std::size_t i = 0; i < n; ++i) {
        detail::append_number(out, static_cast<double>(i) / rate);
        for (const Channel* c : imu) {
          out += ',';
          detail::append_number(out, c->samples[i]);
        }
        out += '\n';
      }
      detail::write_file(dir / f.imu_file, out);
    }
    m.sensors.push_back(f);
  }
  detail::write_file(dir / "manifest.json", to_json(m).dump(2) + "\n");
  return m;
}

}  // namespace hgr
