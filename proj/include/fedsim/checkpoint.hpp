#pragma once

// Checkpoint layout (single file, all integers little-endian):
//
//   bytes [0, 8)        uint64 header length L
//   bytes [8, 8+L)      UTF-8 JSON header
//                       {"segments":[{"name":..,"dims":[..]}..],
//                        "dtype":"f64","count":N}
//   bytes [8+L, 8+L+8N) N IEEE-754 binary64 values
//
// Nothing may follow the last value.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/errors.hpp"
#include "fedsim/param_vector.hpp"

namespace fedsim {

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

inline nlohmann::json manifest_to_json(const ShapeManifest& manifest) {
  auto segments = nlohmann::json::array();
  for (const auto& seg : manifest)
    segments.push_back({{"name", seg.name}, {"dims", seg.dims}});
  return segments;
}

inline ShapeManifest manifest_from_json(const nlohmann::json& segments) {
  if (!segments.is_array()) throw ValidationError("segments must be an array");
  ShapeManifest manifest;
  for (const auto& s : segments) {
    if (!s.is_object() || !s.contains("name") || !s.contains("dims"))
      throw ValidationError("segment entry needs 'name' and 'dims'");
    manifest.push_back(Segment{s.at("name").get<std::string>(),
                               s.at("dims").get<std::vector<std::size_t>>()});
  }
  return manifest;
}

inline std::string encode_checkpoint(const ParamVector& params) {
  nlohmann::json header = {{"segments", manifest_to_json(params.manifest())},
                           {"dtype", "f64"},
                           {"count", params.size()}};
  const std::string text = header.dump();
  std::string out;
  out.reserve(8 + text.size() + 8 * params.size());
  detail::put_u64_le(out, text.size());
  out += text;
  for (double x : params.values())
    detail::put_u64_le(out, std::bit_cast<std::uint64_t>(x));
  return out;
}

inline ParamVector decode_checkpoint(const std::string& bytes) {
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8) throw ValidationError("checkpoint shorter than its length prefix");
  const std::uint64_t header_len = detail::get_u64_le(data);
  if (header_len > bytes.size() - 8) throw ValidationError("checkpoint header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint header is not JSON: ") + e.what());
  }
  if (header.value("dtype", "") != "f64")
    throw ValidationError("unsupported checkpoint dtype");
  if (!header.contains("count") || !header.contains("segments"))
    throw ValidationError("checkpoint header missing 'count' or 'segments'");
  const auto count = header.at("count").get<std::uint64_t>();
  const std::uint64_t payload = bytes.size() - 8 - header_len;
  if (payload != count * 8)
    throw ValidationError("checkpoint payload holds " + std::to_string(payload) +
                          " bytes, expected " + std::to_string(count * 8));

  std::vector<double> values(count);
  const unsigned char* p = data + 8 + header_len;
  for (std::uint64_t i = 0; i < count; ++i)
    values[i] = std::bit_cast<double>(detail::get_u64_le(p + 8 * i));
  try {
    return ParamVector(manifest_from_json(header.at("segments")), std::move(values));
  } catch (const ShapeError& e) {
    throw ValidationError(std::string("checkpoint inconsistent: ") + e.what());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes to a sibling temp file and renames it into place, so readers never
// observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const ParamVector& params) {
  write_file_atomic(path, encode_checkpoint(params));
}

inline ParamVector load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace fedsim
