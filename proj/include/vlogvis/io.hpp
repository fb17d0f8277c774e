#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "text.hpp"

namespace vlogvis::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline std::string read_file(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Write to a sibling temp file then rename over the target, so readers never
/// observe a partially written artifact.
inline void write_file_atomic(const fs::path& path, std::string_view contents)
{
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(ErrorCode::Io, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::vector<json> parse_jsonl(std::string_view contents, const std::string& origin = "<jsonl>")
{
  std::vector<json> rows;
  std::size_t line_no = 0;
  for (const auto& line : text::split(contents, '\n')) {
    ++line_no;
    const std::string t = text::trim(line);
    if (t.empty()) continue;
    try {
      rows.push_back(json::parse(t));
    } catch (const json::exception& e) {
      fail(ErrorCode::Parse, origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

inline std::vector<json> read_jsonl(const fs::path& path) { return parse_jsonl(read_file(path), path.string()); }

inline std::string to_jsonl(const std::vector<json>& rows)
{
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

inline void write_jsonl(const fs::path& path, const std::vector<json>& rows) { write_file_atomic(path, to_jsonl(rows)); }

/// Field access that turns nlohmann type errors into format errors.
template <class T> T field(const json& obj, const char* key)
{
  if (!obj.is_object() || !obj.contains(key)) fail(ErrorCode::Parse, std::string("missing field '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("field '") + key + "': " + e.what());
  }
}

template <class T> T field_or(const json& obj, const char* key, T fallback)
{
  if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
  return field<T>(obj, key);
}

/// Iterate over `a<TAB>b...` rows of a TSV file, skipping blanks and `#` comments.
inline void for_each_tsv_row(std::string_view contents, const std::function<void(const std::vector<std::string>&, std::size_t)>& fn)
{
  std::size_t line_no = 0;
  for (auto line : text::split(contents, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line[0] == '#') continue;
    fn(text::split(line, '\t'), line_no);
  }
}

/// Shortest round-trippable decimal for a double, used by text writers.
inline std::string format_double(double v)
{
  return json(v).dump();
}

} // namespace vlogvis::io
