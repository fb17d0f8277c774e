#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vlogvis/annotation.hpp"
#include "vlogvis/error.hpp"
#include "vlogvis/feature_bank.hpp"
#include "vlogvis/io.hpp"
#include "vlogvis/transcript.hpp"

namespace vlogvis::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum Exit { Ok = 0, ConfigError = 1, InputFormatError = 2, RuntimeFailure = 3 };

inline int exit_code_for(ErrorCode code)
{
  if (code == ErrorCode::Config) return ConfigError;
  return is_format_error(code) ? InputFormatError : RuntimeFailure;
}

inline void report_error(bool as_json, std::string_view code, const std::string& message, int exit_code)
{
  if (as_json) std::cerr << json{{"error", code}, {"message", message}, {"exit_code", exit_code}}.dump() << "\n";
  else std::cerr << "error: " << message << "\n";
}

/// `key = value` lines from a flat config file, via CLI11's INI reader.
/// Section headers are allowed; `[sub]` entries only apply to subcommand `sub`.
struct ConfigEntry {
  std::string section;
  std::string key;
  std::vector<std::string> values;
};

inline std::vector<ConfigEntry> read_config(const fs::path& path)
{
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Config, "cannot open config file " + path.string());
  std::vector<ConfigEntry> out;
  for (const auto& item : CLI::ConfigINI().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue; // section markers
    std::string section = item.parents.empty() ? "" : item.parents.front();
    if (section == "default") section.clear();
    out.push_back({section, item.name, item.inputs});
  }
  return out;
}

/// Extra argv tokens for every config key that names an option of `sub` and
/// is not already on the command line. Command-line values therefore win.
inline std::vector<std::string> config_arguments(const std::vector<ConfigEntry>& entries, CLI::App& sub,
                                                 const std::vector<std::string>& argv)
{
  auto given = [&](const std::string& flag) {
    return std::any_of(argv.begin(), argv.end(), [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (!e.section.empty() && e.section != sub.get_name()) continue;
    const std::string flag = "--" + e.key;
    const auto* opt = sub.get_option_no_throw(flag);
    if (!opt || given(flag)) continue;
    if (e.values.size() == 1) {
      out.push_back(flag + "=" + e.values.front());
    } else {
      out.push_back(flag);
      out.insert(out.end(), e.values.begin(), e.values.end());
    }
  }
  return out;
}

/// Comma-separated list option value -> items.
inline std::vector<std::string> csv_list(const std::string& s)
{
  std::vector<std::string> out;
  for (auto& part : text::split(s, ',')) {
    auto t = text::trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

template <class T> std::vector<T> csv_numbers(const std::string& s)
{
  std::vector<T> out;
  for (const auto& item : csv_list(s)) {
    try {
      if constexpr (std::is_floating_point_v<T>) out.push_back(static_cast<T>(std::stod(item)));
      else out.push_back(static_cast<T>(std::stoull(item)));
    } catch (const std::exception&) {
      fail(ErrorCode::Config, "expected a number in list, got '" + item + "'");
    }
  }
  return out;
}

// ---- stage records --------------------------------------------------------------

/// One extracted action as written by `extract`.
struct ActionRecord {
  std::string action_id;
  std::string video_id;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  double time_s = 0.0;
  std::size_t sentence_index = 0;
  std::size_t span_start = 0, span_end = 0;
  std::vector<std::string> sentence; // surfaces of the whole sentence

  std::string text() const { return text::join(tokens, " "); }
};

inline json to_json(const ActionRecord& a)
{
  return {{"action_id", a.action_id},           {"video_id", a.video_id}, {"text", a.text()},
          {"tokens", a.tokens},                 {"tags", a.tags},         {"time_s", a.time_s},
          {"sentence_index", a.sentence_index}, {"span", {a.span_start, a.span_end}}, {"sentence", a.sentence}};
}

inline ActionRecord action_from_json(const json& j)
{
  ActionRecord a;
  a.action_id = io::field<std::string>(j, "action_id");
  a.video_id = io::field<std::string>(j, "video_id");
  a.tokens = io::field<std::vector<std::string>>(j, "tokens");
  a.tags = io::field<std::vector<std::string>>(j, "tags");
  a.time_s = io::field<double>(j, "time_s");
  a.sentence_index = io::field<std::size_t>(j, "sentence_index");
  const auto span = io::field<std::vector<std::size_t>>(j, "span");
  if (span.size() != 2 || span[0] > span[1]) fail(ErrorCode::Parse, "action " + a.action_id + " has a malformed span");
  a.span_start = span[0];
  a.span_end = span[1];
  a.sentence = io::field<std::vector<std::string>>(j, "sentence");
  if (a.tokens.size() != a.tags.size()) fail(ErrorCode::TagTokenMismatch, "action " + a.action_id + " has tokens and tags of different length");
  return a;
}

inline std::vector<ActionRecord> load_actions(const fs::path& path)
{
  std::vector<ActionRecord> out;
  for (const auto& row : io::read_jsonl(path)) out.push_back(action_from_json(row));
  return out;
}

/// Per-action text features as written by `features`.
struct FeatureRecord {
  std::string action_id;
  std::string video_id;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  ActionFeatures features;
  bool oov = false;

  std::vector<std::string> nouns() const
  {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < tokens.size(); ++i)
      if (text::starts_with(tags[i], "NN")) out.push_back(tokens[i]);
    return out;
  }
};

inline json to_json(const FeatureRecord& r)
{
  const auto& f = r.features;
  return {{"action_id", r.action_id},
          {"video_id", r.video_id},
          {"tokens", r.tokens},
          {"tags", r.tags},
          {"action_emb", vector_to_json(f.action_emb)},
          {"pos_emb", vector_to_json(f.pos_emb)},
          {"context_s", {vector_to_json(f.context_s.first), vector_to_json(f.context_s.second)}},
          {"context_a", {vector_to_json(f.context_a.first), vector_to_json(f.context_a.second)}},
          {"concreteness", f.concreteness ? json(*f.concreteness) : json(nullptr)},
          {"oov", r.oov}};
}

inline FeatureRecord feature_from_json(const json& j)
{
  FeatureRecord r;
  r.action_id = io::field<std::string>(j, "action_id");
  r.video_id = io::field<std::string>(j, "video_id");
  r.tokens = io::field<std::vector<std::string>>(j, "tokens");
  r.tags = io::field<std::vector<std::string>>(j, "tags");
  if (r.tokens.size() != r.tags.size()) fail(ErrorCode::TagTokenMismatch, "feature record " + r.action_id + " has misaligned tags");
  auto& f = r.features;
  f.action_emb = vector_from_json(io::field<json>(j, "action_emb"));
  f.pos_emb = vector_from_json(io::field_or<json>(j, "pos_emb", json::array()));
  auto pair = [&](const char* key) {
    const auto v = io::field_or<json>(j, key, json::array({json::array(), json::array()}));
    if (!v.is_array() || v.size() != 2) fail(ErrorCode::Parse, std::string(key) + " must be a pair of vectors");
    return std::pair{vector_from_json(v[0]), vector_from_json(v[1])};
  };
  f.context_s = pair("context_s");
  f.context_a = pair("context_a");
  if (j.contains("concreteness") && !j["concreteness"].is_null()) f.concreteness = io::field<double>(j, "concreteness");
  r.oov = io::field_or<bool>(j, "oov", false);
  return r;
}

inline std::map<std::string, FeatureRecord> load_features(const fs::path& path)
{
  std::map<std::string, FeatureRecord> out;
  for (const auto& row : io::read_jsonl(path)) {
    auto r = feature_from_json(row);
    const auto id = r.action_id;
    if (!out.emplace(id, std::move(r)).second) fail(ErrorCode::Parse, "duplicate feature record for " + id);
  }
  return out;
}

inline std::vector<AggregatedLabel> load_labels(const fs::path& path)
{
  std::vector<AggregatedLabel> out;
  for (const auto& row : io::read_jsonl(path)) out.push_back(aggregated_from_json(row));
  return out;
}

inline std::vector<AnnotationRecord> load_records(const fs::path& path)
{
  std::vector<AnnotationRecord> out;
  for (const auto& row : io::read_jsonl(path)) out.push_back(record_from_json(row));
  return out;
}

inline std::vector<Transcript> load_transcripts(const fs::path& path)
{
  std::vector<Transcript> out;
  for (const auto& row : io::read_jsonl(path)) out.push_back(transcript_from_json(row));
  return out;
}

/// Channel order for the 8/1/1 split: explicit list, else sorted channel names.
inline std::vector<std::string> channel_order(const std::vector<ManifestEntry>& manifest, const std::string& explicit_order)
{
  if (!explicit_order.empty()) return csv_list(explicit_order);
  std::set<std::string> names;
  for (const auto& m : manifest) names.insert(m.channel);
  return {names.begin(), names.end()};
}

} // namespace vlogvis::cli
