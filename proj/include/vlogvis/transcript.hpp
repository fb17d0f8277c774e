#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "io.hpp"
#include "text.hpp"

namespace vlogvis {

/// One timed caption line.
struct CaptionCue {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;

  bool operator==(const CaptionCue&) const = default;
};

struct Transcript {
  std::string video_id;
  double duration_s = 0.0;
  std::vector<CaptionCue> cues; // sorted by start_s
};

/// One line of the video manifest.
struct ManifestEntry {
  std::string video_id;
  std::string channel;
  double duration_s = 0.0;
  std::string transcript_path;
  std::string frames_dir;
  double fps = 30.0;
};

namespace detail {

inline bool all_digits(std::string_view s)
{
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

inline std::string strip_inline_tags(std::string_view s)
{
  std::string out;
  bool in_tag = false;
  for (char c : s) {
    if (c == '<') in_tag = true;
    else if (c == '>' && in_tag) in_tag = false;
    else if (!in_tag) out.push_back(c);
  }
  return out;
}

} // namespace detail

/// Parse `HH:MM:SS.mmm` into seconds.
inline double parse_timestamp(std::string_view token)
{
  const auto bad = [&] { fail(ErrorCode::MalformedTimestamp, "bad timestamp '" + std::string(token) + "'"); };
  const auto parts = text::split(token, ':');
  if (parts.size() != 3) bad();
  const auto sec = text::split(parts[2], '.');
  if (sec.size() != 2) bad();
  if (!detail::all_digits(parts[0]) || parts[1].size() != 2 || !detail::all_digits(parts[1]) || sec[0].size() != 2 ||
      !detail::all_digits(sec[0]) || sec[1].size() != 3 || !detail::all_digits(sec[1]))
    bad();
  const long h = std::stol(parts[0]);
  const long m = std::stol(parts[1]);
  const long s = std::stol(sec[0]);
  const long ms = std::stol(sec[1]);
  if (m >= 60 || s >= 60) bad();
  return static_cast<double>(((h * 60 + m) * 60 + s) * 1000 + ms) / 1000.0;
}

inline std::string format_timestamp(double seconds)
{
  long long ms = std::llround(seconds * 1000.0);
  if (ms < 0) ms = 0;
  const long long h = ms / 3600000;
  const long long m = (ms / 60000) % 60;
  const long long s = (ms / 1000) % 60;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld.%03lld", h, m, s, ms % 1000);
  return buf;
}

/// Parse the WebVTT subset: optional `WEBVTT` header, then blank-line separated
/// blocks of a timing line followed by one or more text lines. A cue identifier
/// line before the timing line is tolerated; cue settings after the end time
/// are ignored. Cues come back sorted by start time (stable for ties).
inline Transcript parse_transcript(std::string_view raw, std::string video_id, double duration_s)
{
  std::vector<std::string> lines;
  for (auto line : text::split(raw, '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (!lines.empty() && text::starts_with(lines[0], "\xEF\xBB\xBF")) lines[0].erase(0, 3);

  Transcript t;
  t.video_id = std::move(video_id);
  t.duration_s = duration_s;

  std::size_t i = 0;
  auto skip_blank = [&] {
    while (i < lines.size() && text::trim(lines[i]).empty()) ++i;
  };
  auto skip_block = [&] {
    while (i < lines.size() && !text::trim(lines[i]).empty()) ++i;
  };

  skip_blank();
  if (i < lines.size() && text::starts_with(lines[i], "WEBVTT")) skip_block();

  while (true) {
    skip_blank();
    if (i >= lines.size()) break;
    if (text::starts_with(lines[i], "NOTE") || text::starts_with(lines[i], "STYLE") ||
        text::starts_with(lines[i], "REGION")) {
      skip_block();
      continue;
    }
    if (lines[i].find("-->") == std::string::npos) {
      // cue identifier, timing must follow on the next line
      ++i;
      if (i >= lines.size() || lines[i].find("-->") == std::string::npos)
        fail(ErrorCode::MalformedTimestamp, "expected timing line near line " + std::to_string(i + 1));
    }
    const auto fields = text::split_whitespace(lines[i]);
    if (fields.size() < 3 || fields[1] != "-->")
      fail(ErrorCode::MalformedTimestamp, "bad timing line '" + lines[i] + "'");
    CaptionCue cue;
    cue.start_s = parse_timestamp(fields[0]);
    cue.end_s = parse_timestamp(fields[2]);
    if (cue.end_s < cue.start_s) fail(ErrorCode::MalformedTimestamp, "cue ends before it starts: '" + lines[i] + "'");
    if (duration_s > 0.0 && cue.end_s > duration_s + 1.0)
      fail(ErrorCode::MalformedTimestamp, "cue ends past the video duration: '" + lines[i] + "'");
    ++i;
    std::vector<std::string> body;
    while (i < lines.size() && !text::trim(lines[i]).empty()) {
      body.push_back(text::trim(detail::strip_inline_tags(lines[i])));
      ++i;
    }
    cue.text = text::trim(text::join(body, " "));
    if (!cue.text.empty()) t.cues.push_back(std::move(cue));
  }

  if (t.cues.empty()) fail(ErrorCode::EmptyTranscript, "no cues in transcript for " + t.video_id);
  std::stable_sort(t.cues.begin(), t.cues.end(),
                   [](const CaptionCue& a, const CaptionCue& b) { return a.start_s < b.start_s; });
  return t;
}

inline std::string serialize_transcript(const Transcript& t)
{
  std::string out = "WEBVTT\n";
  for (const auto& cue : t.cues) {
    out += '\n';
    out += format_timestamp(cue.start_s) + " --> " + format_timestamp(cue.end_s) + '\n';
    out += cue.text + '\n';
  }
  return out;
}

inline std::size_t word_count(const Transcript& t)
{
  std::size_t n = 0;
  for (const auto& cue : t.cues) n += text::split_whitespace(cue.text).size();
  return n;
}

/// Average speech density over the whole video (manifest duration, not last cue).
inline double words_per_second(const Transcript& t)
{
  if (!(t.duration_s > 0.0)) fail(ErrorCode::ZeroDuration, "video " + t.video_id + " has no positive duration");
  return static_cast<double>(word_count(t)) / t.duration_s;
}

struct DensitySplit {
  std::vector<Transcript> kept;
  std::vector<Transcript> dropped;
};

/// Videos whose density is below `min_rate` are dropped; a rate exactly at the
/// threshold is kept.
inline DensitySplit filter_by_density(std::vector<Transcript> transcripts, double min_rate = 0.5)
{
  DensitySplit out;
  for (auto& t : transcripts) {
    if (words_per_second(t) >= min_rate) out.kept.push_back(std::move(t));
    else out.dropped.push_back(std::move(t));
  }
  return out;
}

// ---- JSON plumbing -------------------------------------------------------

inline ManifestEntry manifest_entry_from_json(const nlohmann::json& j)
{
  ManifestEntry e;
  e.video_id = io::field<std::string>(j, "video_id");
  e.channel = io::field<std::string>(j, "channel");
  e.duration_s = io::field<double>(j, "duration_s");
  e.transcript_path = io::field<std::string>(j, "transcript_path");
  e.frames_dir = io::field<std::string>(j, "frames_dir");
  e.fps = io::field_or<double>(j, "fps", 30.0);
  return e;
}

inline nlohmann::json to_json(const ManifestEntry& e)
{
  return {{"video_id", e.video_id},
          {"channel", e.channel},
          {"duration_s", e.duration_s},
          {"transcript_path", e.transcript_path},
          {"frames_dir", e.frames_dir},
          {"fps", e.fps}};
}

/// Load a JSON-lines manifest. Relative paths are resolved against the
/// manifest's own directory.
inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path)
{
  std::vector<ManifestEntry> out;
  const auto base = path.parent_path();
  for (const auto& row : io::read_jsonl(path)) {
    auto e = manifest_entry_from_json(row);
    if (std::filesystem::path(e.transcript_path).is_relative()) e.transcript_path = (base / e.transcript_path).string();
    if (std::filesystem::path(e.frames_dir).is_relative()) e.frames_dir = (base / e.frames_dir).string();
    out.push_back(std::move(e));
  }
  return out;
}

inline nlohmann::json to_json(const Transcript& t)
{
  nlohmann::json cues = nlohmann::json::array();
  for (const auto& c : t.cues) cues.push_back({{"start_s", c.start_s}, {"end_s", c.end_s}, {"text", c.text}});
  return {{"video_id", t.video_id}, {"duration_s", t.duration_s}, {"cues", cues}};
}

inline Transcript transcript_from_json(const nlohmann::json& j)
{
  Transcript t;
  t.video_id = io::field<std::string>(j, "video_id");
  t.duration_s = io::field<double>(j, "duration_s");
  for (const auto& c : io::field<nlohmann::json>(j, "cues")) {
    t.cues.push_back({io::field<double>(c, "start_s"), io::field<double>(c, "end_s"), io::field<std::string>(c, "text")});
  }
  return t;
}

} // namespace vlogvis
