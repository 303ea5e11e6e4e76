#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "herdpipe/core/error.hpp"
#include "herdpipe/io/files.hpp"

namespace herdpipe::io {

using json = nlohmann::json;

/// Parses line-delimited JSON. Blank lines and lines starting with '#' are
/// skipped so files stay hand-editable.
inline std::vector<json> parse_jsonl(const std::string& text, const std::string& origin = "<memory>") {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(Errc::format, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
  return parse_jsonl(read_text(path), path.string());
}

inline std::string dump_jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  write_text(path, dump_jsonl(records));
}

/// Typed field access that reports the offending key instead of a bare
/// nlohmann type error.
template <typename T>
T field(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) throw Error(Errc::format, std::string("missing field '") + key + "' in " + record.dump());
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::format, std::string("bad field '") + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& record, const char* key, T fallback) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::format, std::string("bad field '") + key + "': " + e.what());
  }
}

}  // namespace herdpipe::io
