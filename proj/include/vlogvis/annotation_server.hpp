#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
// <resolv.h> defines `_res` as a macro, which breaks Eigen parameter names.
#ifdef _res
#undef _res
#endif
#include <json.hpp>

#include "annotation.hpp"
#include "clip_segmentation.hpp"
#include "io.hpp"

namespace vlogvis {

/// Where a miniclip's frames live and which part of the video it covers.
struct ClipMedia {
  std::filesystem::path frames_dir;
  double fps = 30.0;
  double start_s = 0.0;
  double end_s = 0.0;
};

inline std::string utc_timestamp()
{
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// JSON API over an AnnotationStore, consumed by the labeling UI.
///
///   GET  /api/hits/next?worker_id=W
///   POST /api/hits/{hit_id}/labels
///   GET  /api/progress
///   GET  /api/agreement
///   GET  /frames/{miniclip_id}/{i}.pgm
class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, std::map<std::string, ClipMedia> media, std::map<std::string, std::string> action_text)
      : store_(store), media_(std::move(media)), action_text_(std::move(action_text))
  {
    routes();
  }

  /// Serve static files (the UI bundle) under `/`.
  bool mount_static(const std::filesystem::path& dir) { return server_.set_mount_point("/", dir.string()); }

  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

  /// Thumbnail indices (1 fps) for a miniclip: sample i maps to native frame
  /// round((start_s + i) * fps). Samples without a frame file are dropped.
  std::vector<std::size_t> thumbnail_frames(const std::string& miniclip_id) const
  {
    std::vector<std::size_t> out;
    const auto it = media_.find(miniclip_id);
    if (it == media_.end()) return out;
    const auto& m = it->second;
    const auto seconds = static_cast<std::size_t>(std::floor(m.end_s - m.start_s));
    for (std::size_t i = 0; i < seconds; ++i) {
      const auto idx = static_cast<std::size_t>(std::llround((m.start_s + static_cast<double>(i)) * m.fps));
      if (!std::filesystem::exists(frame_path(m.frames_dir, idx))) break;
      out.push_back(idx);
    }
    return out;
  }

  nlohmann::json hit_view(const Hit& h) const
  {
    nlohmann::json clips = nlohmann::json::array();
    for (const auto& c : h.clips) {
      nlohmann::json urls = nlohmann::json::array();
      const auto frames = thumbnail_frames(c.miniclip_id);
      for (std::size_t i = 0; i < frames.size(); ++i) urls.push_back("/frames/" + c.miniclip_id + "/" + std::to_string(i) + ".pgm");
      nlohmann::json actions = nlohmann::json::array();
      for (const auto& a : c.action_ids) {
        const auto t = action_text_.find(a);
        actions.push_back({{"action_id", a}, {"text", t == action_text_.end() ? a : t->second}});
      }
      clips.push_back({{"miniclip_id", c.miniclip_id}, {"frame_urls", urls}, {"actions", actions}});
    }
    return {{"hit_id", h.hit_id}, {"miniclips", clips}};
  }

 private:
  static void send_json(httplib::Response& res, int status, const nlohmann::json& body)
  {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message)
  {
    send_json(res, status, {{"error", code}, {"message", message}});
  }

  void routes()
  {
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server_.Get("/api/hits/next", [this](const httplib::Request& req, httplib::Response& res) {
      const auto worker = req.get_param_value("worker_id");
      if (worker.empty()) return send_error(res, 400, "MissingWorker", "worker_id query parameter is required");
      const auto hit = store_.next_hit(worker);
      if (!hit) return send_error(res, 404, "NoTasks", "no HITs left for this worker");
      send_json(res, 200, hit_view(*hit));
    });

    server_.Post(R"(/api/hits/([^/]+)/labels)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string hit_id = req.matches[1];
      std::string worker;
      std::vector<LabelResponse> labels;
      try {
        const auto body = nlohmann::json::parse(req.body);
        worker = io::field<std::string>(body, "worker_id");
        for (const auto& l : io::field<nlohmann::json>(body, "labels"))
          labels.push_back({io::field<std::string>(l, "miniclip_id"), io::field<std::string>(l, "action_id"),
                            parse_raw_label(io::field<std::string>(l, "raw_label"))});
      } catch (const nlohmann::json::exception& e) {
        return send_error(res, 400, "Parse", e.what());
      } catch (const Error& e) {
        return send_error(res, 400, to_string(e.code()), e.what());
      }
      try {
        const auto out = store_.submit(hit_id, worker, labels);
        send_json(res, 200, {{"hit_id", hit_id}, {"verdict", to_string(out.verdict)}, {"accepted_for_hit", out.accepted_for_hit}});
      } catch (const Error& e) {
        switch (e.code()) {
          case ErrorCode::DuplicateRecord: return send_error(res, 409, to_string(e.code()), e.what());
          case ErrorCode::UnknownHit: return send_error(res, 404, to_string(e.code()), e.what());
          case ErrorCode::IncompleteSubmission: return send_error(res, 400, to_string(e.code()), e.what());
          default: return send_error(res, 500, to_string(e.code()), e.what());
        }
      }
    });

    server_.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
      const auto p = store_.progress();
      send_json(res, 200,
                {{"annotated", p.annotated},
                 {"required", p.required},
                 {"hits_total", p.hits_total},
                 {"hits_complete", p.hits_complete},
                 {"records", p.records}});
    });

    server_.Get("/api/agreement", [this](const httplib::Request&, httplib::Response& res) {
      const auto recs = store_.accepted_records();
      const auto items = binary_count_table(recs, static_cast<int>(store_.annotators())).size();
      const auto kappa = store_.agreement();
      send_json(res, 200, {{"kappa", kappa ? nlohmann::json(*kappa) : nlohmann::json(nullptr)}, {"items", items}, {"defined", kappa.has_value()}});
    });

    server_.Get(R"(/frames/([^/]+)/(\d+)\.pgm)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string clip = req.matches[1];
      const auto sample = std::stoul(req.matches[2]);
      const auto frames = thumbnail_frames(clip);
      if (sample >= frames.size()) return send_error(res, 404, "NoFrame", "no frame " + std::to_string(sample) + " for " + clip);
      try {
        const auto bytes = io::read_file(frame_path(media_.at(clip).frames_dir, frames[sample]));
        res.set_content(bytes, "image/x-portable-graymap");
      } catch (const Error& e) {
        send_error(res, 500, to_string(e.code()), e.what());
      }
    });
  }

  AnnotationStore& store_;
  std::map<std::string, ClipMedia> media_;
  std::map<std::string, std::string> action_text_;
  httplib::Server server_;
};

} // namespace vlogvis
