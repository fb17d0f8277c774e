#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vlogvis/annotation.hpp"
#include "vlogvis/feature_bank.hpp"
#include "vlogvis/io.hpp"
#include "vlogvis/neural.hpp"
#include "vlogvis/rng.hpp"

namespace planted {

using vlogvis::Vector;

/// Label = text marker XOR video marker. Markers are balanced and independent,
/// so either modality alone carries no information about the label.
struct XorConfig {
  std::size_t train = 2000;
  std::size_t validation = 250;
  std::size_t test = 500;
  std::size_t text_dim = 4;
  std::size_t pos_dim = 2;
  std::size_t context_dim = 3;
  std::uint32_t dim_frame = 3;
  std::uint32_t dim_seq = 1;
  std::size_t frames = 4;
  double noise = 0.3;
  std::uint64_t seed = 7;
};

struct XorItem {
  vlogvis::nn::MultimodalItem item;
  int text_marker = 0;
  int video_marker = 0;
  std::size_t channel = 0; // 0..7 train, 8 validation, 9 test
};

struct XorData {
  std::vector<vlogvis::nn::MultimodalItem> train, validation, test;
  std::vector<XorItem> all;
};

inline Vector noisy(std::size_t dim, double lead, double noise, vlogvis::Rng& rng)
{
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = noise * rng.normal();
  v[0] += lead;
  return v;
}

inline XorData make_xor(const XorConfig& cfg = {})
{
  vlogvis::Rng rng(cfg.seed);
  XorData out;
  const std::size_t total = cfg.train + cfg.validation + cfg.test;
  for (std::size_t i = 0; i < total; ++i) {
    XorItem x;
    x.text_marker = static_cast<int>(i % 2);
    x.video_marker = static_cast<int>((i / 2) % 2);
    if (i < cfg.train) x.channel = i % 8;
    else if (i < cfg.train + cfg.validation) x.channel = 8;
    else x.channel = 9;

    auto& m = x.item;
    char buf[32];
    std::snprintf(buf, sizeof buf, "ch%zu_%05zu", x.channel, i);
    m.miniclip_id = std::string(buf) + "_0";
    m.action_id = std::string(buf) + "_a0000";
    m.label = x.text_marker ^ x.video_marker;
    m.text.action_emb = noisy(cfg.text_dim, x.text_marker ? 1.0 : -1.0, cfg.noise, rng);
    m.text.pos_emb = noisy(cfg.pos_dim, 0.0, 1.0, rng);
    m.text.context_s = {noisy(cfg.context_dim, 0.0, 1.0, rng), noisy(cfg.context_dim, 0.0, 1.0, rng)};
    m.text.context_a = {noisy(cfg.context_dim, 0.0, 1.0, rng), noisy(cfg.context_dim, 0.0, 1.0, rng)};
    m.text.concreteness = rng.uniform(1.0, 5.0);

    auto rows = std::make_shared<vlogvis::FeatureRows>();
    rows->dim_frame = cfg.dim_frame;
    rows->dim_seq = cfg.dim_seq;
    const double lead = x.video_marker ? 1.0 : -1.0;
    for (std::size_t t = 0; t < cfg.frames; ++t)
      for (std::size_t k = 0; k < rows->width(); ++k)
        rows->values.push_back(static_cast<float>((k == 0 ? lead : 0.0) + cfg.noise * rng.normal()));
    m.video = rows;

    if (i < cfg.train) out.train.push_back(m);
    else if (i < cfg.train + cfg.validation) out.validation.push_back(m);
    else out.test.push_back(m);
    out.all.push_back(std::move(x));
  }
  return out;
}

inline vlogvis::nn::FusionSpec xor_spec(const XorConfig& cfg, vlogvis::nn::Modality modality, std::set<vlogvis::nn::Extra> extras = {})
{
  vlogvis::nn::FusionSpec s;
  s.modality = modality;
  s.video_dim = cfg.dim_frame + cfg.dim_seq;
  s.text_dim = cfg.text_dim;
  s.pos_dim = cfg.pos_dim;
  s.context_dim = cfg.context_dim;
  s.extras = std::move(extras);
  return s;
}

/// Settings that learn the XOR fixture well within the time budget.
inline vlogvis::nn::TrainConfig xor_train_config(std::uint64_t seed = 1)
{
  vlogvis::nn::TrainConfig c;
  c.learning_rate = 0.01;
  c.epochs = 15;
  c.batch_size = 32;
  c.seed = seed;
  c.hidden_dim = 8;
  c.fc_sizes = {16, 8};
  c.dropout = 0.1;
  return c;
}

/// Write the dataset as CLI inputs: manifest, features, labels, feature bank.
inline void write_xor_files(const XorData& data, const std::filesystem::path& dir)
{
  namespace fs = std::filesystem;
  using nlohmann::json;
  fs::create_directories(dir / "bank");
  std::vector<json> manifest, features, labels;
  for (std::size_t ch = 0; ch < 10; ++ch) {
    const auto c = "ch" + std::to_string(ch);
    manifest.push_back({{"video_id", c + "_video"}, {"channel", c}, {"duration_s", 60.0}, {"transcript_path", "none.vtt"}, {"frames_dir", "none"}});
  }
  for (const auto& x : data.all) {
    const auto& m = x.item;
    const std::string video = "ch" + std::to_string(x.channel) + "_video";
    features.push_back({{"action_id", m.action_id},
                        {"video_id", video},
                        {"tokens", {"marker"}},
                        {"tags", {"NN"}},
                        {"action_emb", vlogvis::vector_to_json(m.text.action_emb)},
                        {"pos_emb", vlogvis::vector_to_json(m.text.pos_emb)},
                        {"context_s", {vlogvis::vector_to_json(m.text.context_s.first), vlogvis::vector_to_json(m.text.context_s.second)}},
                        {"context_a", {vlogvis::vector_to_json(m.text.context_a.first), vlogvis::vector_to_json(m.text.context_a.second)}},
                        {"concreteness", *m.text.concreteness},
                        {"oov", false}});
    labels.push_back({{"miniclip_id", m.miniclip_id}, {"action_id", m.action_id}, {"label", m.label ? "Visible" : "NotVisibleOrNotAction"}});
    vlogvis::save_feature_bank(dir / "bank" / (m.miniclip_id + ".vfb"), *m.video);
  }
  vlogvis::io::write_jsonl(dir / "manifest.jsonl", manifest);
  vlogvis::io::write_jsonl(dir / "features.jsonl", features);
  vlogvis::io::write_jsonl(dir / "labels.jsonl", labels);
}

} // namespace planted
