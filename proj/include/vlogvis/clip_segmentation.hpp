#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "io.hpp"

namespace vlogvis {

/// A time window of one video with the actions assigned to it.
struct Miniclip {
  std::string video_id;
  std::size_t index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::vector<std::string> action_ids;

  std::string id() const { return video_id + "_" + std::to_string(index); }
  bool operator==(const Miniclip&) const = default;
};

inline std::string miniclip_id(const std::string& video_id, std::size_t index) { return video_id + "_" + std::to_string(index); }

/// 8-bit grayscale image, row-major.
class Frame {
 public:
  Frame(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels))
  {
    if (width_ < 2 || height_ < 2) fail(ErrorCode::DimensionMismatch, "frames must be at least 2x2");
    if (width_ * height_ != pixels_.size()) fail(ErrorCode::DimensionMismatch, "pixel count does not match width*height");
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> pixels_;
};

struct TimedAction {
  std::string id;
  double time_s = 0.0;
};

/// Greedy grouping of time-sorted actions into miniclips: a group grows while
/// its core span (last - first) stays within `max_core_s`; each group is then
/// padded by `pad_s` on both sides and clamped to the video.
inline std::vector<Miniclip> segment(const std::string& video_id, double duration_s, std::vector<TimedAction> actions,
                                     double max_core_s = 60.0, double pad_s = 15.0)
{
  if (actions.empty()) fail(ErrorCode::EmptyActionList, "no actions to segment for " + video_id);
  std::stable_sort(actions.begin(), actions.end(), [](const TimedAction& a, const TimedAction& b) { return a.time_s < b.time_s; });

  std::vector<Miniclip> clips;
  std::size_t g = 0;
  while (g < actions.size()) {
    std::size_t e = g + 1;
    while (e < actions.size() && actions[e].time_s - actions[g].time_s <= max_core_s) ++e;
    Miniclip m;
    m.video_id = video_id;
    m.index = clips.size();
    m.start_s = std::max(0.0, actions[g].time_s - pad_s);
    m.end_s = std::min(duration_s, actions[e - 1].time_s + pad_s);
    for (std::size_t k = g; k < e; ++k) m.action_ids.push_back(actions[k].id);
    clips.push_back(std::move(m));
    g = e;
  }
  return clips;
}

/// Pearson correlation over all pixels of two equally sized frames.
inline double pearson_2d(const Frame& a, const Frame& b)
{
  if (a.width() != b.width() || a.height() != b.height()) fail(ErrorCode::DimensionMismatch, "frames differ in size");
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  const double n = static_cast<double>(pa.size());
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    sa += pa[i];
    sb += pb[i];
  }
  const double ma = sa / n, mb = sb / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double da = pa[i] - ma;
    const double db = pb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) fail(ErrorCode::ZeroVariance, "constant frame");
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

inline double median(std::vector<double> values)
{
  if (values.empty()) fail(ErrorCode::TooFewFrames, "median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// Median correlation between consecutive sampled frames (every `stride`-th
/// frame, starting at 0). Pairs involving a constant frame are skipped.
inline double motion_score(std::span<const Frame> frames, std::size_t stride = 100)
{
  if (stride == 0) fail(ErrorCode::TooFewFrames, "stride must be positive");
  std::vector<const Frame*> sampled;
  for (std::size_t i = 0; i < frames.size(); i += stride) sampled.push_back(&frames[i]);
  if (sampled.size() < 2) fail(ErrorCode::TooFewFrames, "need at least 2 sampled frames, got " + std::to_string(sampled.size()));
  std::vector<double> rs;
  for (std::size_t i = 1; i < sampled.size(); ++i) {
    try {
      rs.push_back(pearson_2d(*sampled[i - 1], *sampled[i]));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
    }
  }
  if (rs.empty()) fail(ErrorCode::TooFewFrames, "every sampled pair contains a constant frame");
  return median(std::move(rs));
}

struct StaticSplit {
  std::vector<Miniclip> kept;
  std::vector<Miniclip> dropped;
};

/// Drop miniclips whose motion score is strictly above `threshold`.
inline StaticSplit filter_static(std::vector<Miniclip> miniclips, std::span<const double> scores, double threshold = 0.8)
{
  if (miniclips.size() != scores.size()) fail(ErrorCode::LengthMismatch, "one score per miniclip required");
  StaticSplit out;
  for (std::size_t i = 0; i < miniclips.size(); ++i) {
    if (scores[i] > threshold) out.dropped.push_back(std::move(miniclips[i]));
    else out.kept.push_back(std::move(miniclips[i]));
  }
  return out;
}

// ---- PGM frames --------------------------------------------------------------

inline Frame parse_pgm(std::string_view bytes, const std::string& origin = "<pgm>")
{
  std::size_t pos = 0;
  auto skip_ws_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::size_t {
    skip_ws_and_comments();
    std::size_t v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) fail(ErrorCode::Parse, origin + ": malformed PGM header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail(ErrorCode::BadMagic, origin + ": not a binary PGM (P5)");
  pos = 2;
  const auto w = read_uint();
  const auto h = read_uint();
  const auto maxval = read_uint();
  if (maxval != 255) fail(ErrorCode::Parse, origin + ": only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) fail(ErrorCode::Parse, origin + ": malformed PGM header");
  ++pos;
  if (bytes.size() - pos < w * h) fail(ErrorCode::TruncatedFile, origin + ": PGM pixel data truncated");
  std::vector<std::uint8_t> px(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                               bytes.begin() + static_cast<std::ptrdiff_t>(pos + w * h));
  return Frame(w, h, std::move(px));
}

inline std::string encode_pgm(const Frame& f)
{
  std::string out = "P5\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(f.pixels().data()), f.pixels().size());
  return out;
}

inline std::filesystem::path frame_path(const std::filesystem::path& frames_dir, std::size_t index)
{
  char name[32];
  std::snprintf(name, sizeof name, "frame_%06zu.pgm", index);
  return frames_dir / name;
}

inline Frame load_frame(const std::filesystem::path& path) { return parse_pgm(io::read_file(path), path.string()); }

/// Native frame indices covering [start_s, end_s), clipped to the frames on disk.
inline std::vector<std::size_t> clip_frame_indices(const std::filesystem::path& frames_dir, double fps, double start_s, double end_s)
{
  std::vector<std::size_t> out;
  const auto first = static_cast<std::size_t>(std::llround(start_s * fps));
  const auto last = static_cast<std::size_t>(std::llround(end_s * fps));
  for (std::size_t i = first; i < last; ++i) {
    if (!std::filesystem::exists(frame_path(frames_dir, i))) break;
    out.push_back(i);
  }
  return out;
}

/// motion_score over a miniclip's frames on disk; only sampled frames are read.
inline double miniclip_motion_score(const std::filesystem::path& frames_dir, double fps, const Miniclip& m, std::size_t stride = 100)
{
  const auto idx = clip_frame_indices(frames_dir, fps, m.start_s, m.end_s);
  std::vector<Frame> sampled;
  for (std::size_t k = 0; k < idx.size(); k += stride) sampled.push_back(load_frame(frame_path(frames_dir, idx[k])));
  return motion_score(sampled, 1);
}

// ---- JSON -------------------------------------------------------------------

inline nlohmann::json to_json(const Miniclip& m)
{
  return {{"video_id", m.video_id}, {"index", m.index}, {"start_s", m.start_s}, {"end_s", m.end_s}, {"action_ids", m.action_ids}};
}

inline Miniclip miniclip_from_json(const nlohmann::json& j)
{
  Miniclip m;
  m.video_id = io::field<std::string>(j, "video_id");
  m.index = io::field<std::size_t>(j, "index");
  m.start_s = io::field<double>(j, "start_s");
  m.end_s = io::field<double>(j, "end_s");
  m.action_ids = io::field<std::vector<std::string>>(j, "action_ids");
  return m;
}

} // namespace vlogvis
