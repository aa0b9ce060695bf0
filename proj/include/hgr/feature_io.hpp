#pragma once

#include <hgr/features.hpp>
#include <hgr/session_io.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

namespace hgr {

inline constexpr std::uint32_t kFeatureCacheVersion = 1;
inline constexpr char kFeatureCacheMagic[4] = {'H', 'G', 'R', 'F'};

/// Header: gesture,repetition,window_index,<placement>.<kind>.<feature>...
inline std::string feature_matrix_csv(const FeatureMatrix& fm) {
  std::string out = "gesture,repetition,window_index";
  for (const auto& c : fm.cols) out += "," + c.name();
  out += '\n';
  for (Eigen::Index i = 0; i < fm.data.rows(); ++i) {
    const auto& r = fm.rows[static_cast<std::size_t>(i)];
    out += std::to_string(r.gesture) + "," + std::to_string(r.repetition) + "," + std::to_string(r.window);
    for (Eigen::Index j = 0; j < fm.data.cols(); ++j) {
      out += ',';
      detail::append_number(out, fm.data(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_feature_csv(const FeatureMatrix& fm, const fs::path& path) {
  detail::write_file(path, feature_matrix_csv(fm));
}

inline FeatureMatrix read_feature_csv(const fs::path& path) {
  const auto t = detail::parse_csv(detail::read_file(path), path.string());
  if (t.header.size() < 3 || t.header[0] != "gesture" || t.header[1] != "repetition" ||
      t.header[2] != "window_index")
    fail(ErrorCode::ParseError, path.string() + ": not a feature matrix");
  FeatureMatrix fm;
  for (std::size_t j = 3; j < t.header.size(); ++j) {
    const auto& name = t.header[j];
    const auto d1 = name.find('.');
    const auto d2 = name.find('.', d1 + 1);
    const auto p = parse_placement(name.substr(0, d1));
    const auto k = parse_channel_kind(name.substr(d1 + 1, d2 - d1 - 1));
    const auto f = parse_feature(name.substr(d2 + 1));
    if (d1 == std::string::npos || d2 == std::string::npos || !p || !k || !f)
      fail(ErrorCode::ParseError, path.string() + ": bad column '" + name + "'");
    fm.cols.push_back({*p, *k, *f});
  }
  const std::size_t n = t.columns[0].size();
  for (std::size_t i = 0; i < n; ++i)
    fm.rows.push_back({static_cast<int>(t.columns[0][i]), static_cast<int>(t.columns[1][i]),
                       static_cast<int>(t.columns[2][i])});
  fm.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(fm.cols.size()));
  for (std::size_t j = 0; j < fm.cols.size(); ++j)
    for (std::size_t i = 0; i < n; ++i)
      fm.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.columns[j + 3][i];
  return fm;
}

// Binary cache layout (little-endian host order):
//   magic[4] version:u32 rows:u64 cols:u64
//   cols x {placement:u8 kind:u8 feature:u8}
//   rows x {gesture:i32 repetition:i32 window:i32}
//   data: rows*cols f64, column-major
inline void write_feature_cache(const FeatureMatrix& fm, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidArgument, "cannot write " + path.string());
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  out.write(kFeatureCacheMagic, 4);
  put(kFeatureCacheVersion);
  put(static_cast<std::uint64_t>(fm.rows.size()));
  put(static_cast<std::uint64_t>(fm.cols.size()));
  for (const auto& c : fm.cols) {
    put(static_cast<std::uint8_t>(c.placement));
    put(static_cast<std::uint8_t>(c.kind));
    put(static_cast<std::uint8_t>(c.feature));
  }
  for (const auto& r : fm.rows) {
    put(static_cast<std::int32_t>(r.gesture));
    put(static_cast<std::int32_t>(r.repetition));
    put(static_cast<std::int32_t>(r.window));
  }
  out.write(reinterpret_cast<const char*>(fm.data.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(fm.data.size())));
  if (!out) fail(ErrorCode::InvalidArgument, "write failed for " + path.string());
}

inline FeatureMatrix read_feature_cache(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingFile, path.string());
  auto get = [&](auto& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) fail(ErrorCode::ParseError, path.string() + ": truncated cache");
  };
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kFeatureCacheMagic, 4) != 0)
    fail(ErrorCode::ParseError, path.string() + ": not a feature cache");
  std::uint32_t version = 0;
  get(version);
  if (version != kFeatureCacheVersion)
    fail(ErrorCode::CacheVersionMismatch, path.string() + ": cache version " + std::to_string(version));
  std::uint64_t rows = 0, cols = 0;
  get(rows);
  get(cols);
  FeatureMatrix fm;
  for (std::uint64_t j = 0; j < cols; ++j) {
    std::uint8_t p, k, f;
    get(p);
    get(k);
    get(f);
    if (p >= kAllPlacements.size() || k >= kAllChannelKinds.size() || f >= kNumFeatures)
      fail(ErrorCode::ParseError, path.string() + ": bad column id");
    fm.cols.push_back({static_cast<Placement>(p), static_cast<ChannelKind>(k), static_cast<Feature>(f)});
  }
  for (std::uint64_t i = 0; i < rows; ++i) {
    std::int32_t g, r, w;
    get(g);
    get(r);
    get(w);
    fm.rows.push_back({g, r, w});
  }
  fm.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(fm.data.data()),
          static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!in) fail(ErrorCode::ParseError, path.string() + ": truncated cache");
  return fm;
}

}  // namespace hgr
