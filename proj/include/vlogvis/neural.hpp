#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "error.hpp"
#include "feature_bank.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "text.hpp"

namespace vlogvis::nn {

using Matrix = Eigen::MatrixXd;
using vlogvis::Vector;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vector sigmoid(const Vector& z) { return z.unaryExpr([](double v) { return sigmoid(v); }); }

/// Flat views over every trainable tensor, in declaration order.
using ParamList = std::vector<std::span<double>>;
using ConstParamList = std::vector<std::span<const double>>;

inline std::span<double> view(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline std::span<double> view(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

enum class Init { Glorot, Zero };

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline void glorot_fill(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng)
{
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-limit, limit);
}

// ---- LSTM ---------------------------------------------------------------------

/// Gate blocks are stacked in the order input, forget, output, candidate.
struct LstmParams {
  Matrix W; // 4H x D
  Matrix U; // 4H x H
  Vector b; // 4H

  std::size_t input_dim() const { return static_cast<std::size_t>(W.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(U.cols()); }

  static LstmParams create(std::size_t input_dim, std::size_t hidden_dim, Init init, Rng& rng)
  {
    const auto D = static_cast<Eigen::Index>(input_dim);
    const auto H = static_cast<Eigen::Index>(hidden_dim);
    LstmParams p{Matrix::Zero(4 * H, D), Matrix::Zero(4 * H, H), Vector::Zero(4 * H)};
    if (init == Init::Glorot) {
      glorot_fill(p.W, input_dim, hidden_dim, rng);
      glorot_fill(p.U, hidden_dim, hidden_dim, rng);
      p.b.segment(H, H).setOnes(); // forget gate bias
    }
    return p;
  }

  LstmParams zeros_like() const { return {Matrix::Zero(W.rows(), W.cols()), Matrix::Zero(U.rows(), U.cols()), Vector::Zero(b.size())}; }

  void collect(ParamList& out) { out.insert(out.end(), {view(W), view(U), view(b)}); }
};

struct LstmCache {
  std::vector<Vector> x;
  std::vector<Vector> h; // h[0] = 0, h[t+1] after step t
  std::vector<Vector> c;
  std::vector<Vector> i, f, o, g, tanh_c;
};

/// Run the recurrence from h0 = c0 = 0 and return the last hidden state.
inline Vector lstm_forward(const LstmParams& p, std::span<const Vector> xs, LstmCache* cache = nullptr)
{
  if (xs.empty()) fail(ErrorCode::EmptySequence, "LSTM input sequence is empty");
  const auto H = static_cast<Eigen::Index>(p.hidden_dim());
  Vector h = Vector::Zero(H), c = Vector::Zero(H);
  if (cache) {
    *cache = LstmCache{};
    cache->h.push_back(h);
    cache->c.push_back(c);
  }
  for (const auto& x : xs) {
    if (static_cast<std::size_t>(x.size()) != p.input_dim())
      fail(ErrorCode::DimMismatch, "LSTM input has dim " + std::to_string(x.size()) + ", expected " + std::to_string(p.input_dim()));
    const Vector z = p.W * x + p.U * h + p.b;
    Vector i = sigmoid(Vector(z.segment(0, H)));
    Vector f = sigmoid(Vector(z.segment(H, H)));
    Vector o = sigmoid(Vector(z.segment(2 * H, H)));
    Vector g = z.segment(3 * H, H).array().tanh();
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    Vector tc = c.array().tanh();
    h = o.cwiseProduct(tc);
    if (cache) {
      cache->x.push_back(x);
      cache->i.push_back(std::move(i));
      cache->f.push_back(std::move(f));
      cache->o.push_back(std::move(o));
      cache->g.push_back(std::move(g));
      cache->tanh_c.push_back(std::move(tc));
      cache->h.push_back(h);
      cache->c.push_back(c);
    }
  }
  return h;
}

/// Backpropagate dL/dh_T through time. Parameter gradients are added to
/// `grads`; per-step input gradients go to `dxs` when given.
inline void lstm_backward(const LstmParams& p, const LstmCache& cache, const Vector& dh_last, LstmParams& grads,
                          std::vector<Vector>* dxs = nullptr)
{
  const auto H = static_cast<Eigen::Index>(p.hidden_dim());
  const std::size_t T = cache.x.size();
  if (dxs) dxs->assign(T, Vector());
  Vector dh = dh_last;
  Vector dc = Vector::Zero(H);
  Vector dz(4 * H);
  for (std::size_t s = T; s-- > 0;) {
    const auto& i = cache.i[s];
    const auto& f = cache.f[s];
    const auto& o = cache.o[s];
    const auto& g = cache.g[s];
    const auto& tc = cache.tanh_c[s];
    const Vector d_o = dh.cwiseProduct(tc);
    dc += dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
    const Vector d_i = dc.cwiseProduct(g);
    const Vector d_g = dc.cwiseProduct(i);
    const Vector d_f = dc.cwiseProduct(cache.c[s]);
    dz.segment(0, H) = d_i.array() * i.array() * (1.0 - i.array());
    dz.segment(H, H) = d_f.array() * f.array() * (1.0 - f.array());
    dz.segment(2 * H, H) = d_o.array() * o.array() * (1.0 - o.array());
    dz.segment(3 * H, H) = d_g.array() * (1.0 - g.array().square());
    grads.W.noalias() += dz * cache.x[s].transpose();
    grads.U.noalias() += dz * cache.h[s].transpose();
    grads.b += dz;
    if (dxs) (*dxs)[s] = p.W.transpose() * dz;
    dh = p.U.transpose() * dz;
    dc = dc.cwiseProduct(f);
  }
}

// ---- feed-forward head ------------------------------------------------------------

struct DenseLayer {
  Matrix W; // out x in
  Vector b;
};

/// Hidden layers are ReLU + inverted dropout; the last layer has one output
/// that goes through a sigmoid.
struct MlpParams {
  std::vector<DenseLayer> layers;
  std::vector<double> dropout; // one rate per hidden layer, in [0, 1)

  static MlpParams create(std::size_t input_dim, const std::vector<std::size_t>& hidden, double dropout_rate, Init init, Rng& rng)
  {
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail(ErrorCode::Config, "dropout rate must be in [0, 1)");
    MlpParams p;
    std::size_t in = input_dim;
    auto add = [&](std::size_t out) {
      DenseLayer l{Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)), Vector::Zero(static_cast<Eigen::Index>(out))};
      if (init == Init::Glorot) glorot_fill(l.W, in, out, rng);
      p.layers.push_back(std::move(l));
      in = out;
    };
    for (auto h : hidden) {
      add(h);
      p.dropout.push_back(dropout_rate);
    }
    add(1);
    return p;
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(layers.front().W.cols()); }

  MlpParams zeros_like() const
  {
    MlpParams z;
    for (const auto& l : layers) z.layers.push_back({Matrix::Zero(l.W.rows(), l.W.cols()), Vector::Zero(l.b.size())});
    z.dropout = dropout;
    return z;
  }

  void collect(ParamList& out)
  {
    for (auto& l : layers) out.insert(out.end(), {view(l.W), view(l.b)});
  }
};

enum class Mode { Train, Eval };

struct MlpCache {
  std::vector<Vector> inputs; // input to each layer
  std::vector<Vector> pre;    // hidden pre-activations
  std::vector<Vector> masks;  // scaled dropout masks (ones in eval)
};

struct MlpOutput {
  double logit = 0.0;
  double p = 0.5;
};

inline MlpOutput mlp_forward(const MlpParams& params, const Vector& x, Mode mode, Rng* rng = nullptr, MlpCache* cache = nullptr)
{
  if (static_cast<std::size_t>(x.size()) != params.input_dim())
    fail(ErrorCode::DimMismatch, "MLP input has dim " + std::to_string(x.size()) + ", expected " + std::to_string(params.input_dim()));
  if (cache) *cache = MlpCache{};
  Vector a = x;
  const std::size_t L = params.layers.size();
  for (std::size_t l = 0; l + 1 < L; ++l) {
    const auto& layer = params.layers[l];
    if (cache) cache->inputs.push_back(a);
    const Vector z = layer.W * a + layer.b;
    a = z.cwiseMax(0.0);
    Vector mask = Vector::Ones(z.size());
    const double rate = params.dropout[l];
    if (mode == Mode::Train && rate > 0.0) {
      if (!rng) fail(ErrorCode::Config, "train-mode dropout needs a generator");
      for (Eigen::Index j = 0; j < mask.size(); ++j) mask[j] = rng->uniform() < rate ? 0.0 : 1.0 / (1.0 - rate);
      a = a.cwiseProduct(mask);
    }
    if (cache) {
      cache->pre.push_back(z);
      cache->masks.push_back(std::move(mask));
    }
  }
  if (cache) cache->inputs.push_back(a);
  const auto& last = params.layers.back();
  MlpOutput out;
  out.logit = (last.W * a + last.b)[0];
  out.p = sigmoid(out.logit);
  return out;
}

inline void mlp_backward(const MlpParams& params, const MlpCache& cache, double dlogit, MlpParams& grads, Vector* dx = nullptr)
{
  const std::size_t L = params.layers.size();
  grads.layers[L - 1].W.row(0) += dlogit * cache.inputs[L - 1].transpose();
  grads.layers[L - 1].b[0] += dlogit;
  Vector da = params.layers[L - 1].W.row(0).transpose() * dlogit;
  for (std::size_t l = L - 1; l-- > 0;) {
    da = da.cwiseProduct(cache.masks[l]);
    const Vector dz = (cache.pre[l].array() > 0.0).select(da, 0.0);
    grads.layers[l].W.noalias() += dz * cache.inputs[l].transpose();
    grads.layers[l].b += dz;
    da = params.layers[l].W.transpose() * dz;
  }
  if (dx) *dx = da;
}

// ---- loss and optimizer ---------------------------------------------------------------

struct LossGrad {
  double loss = 0.0;
  double dp = 0.0; // dloss/dp
};

/// Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
inline LossGrad bce_loss(double p, int y)
{
  const double q = std::clamp(p, 1e-7, 1.0 - 1e-7);
  const double t = y ? 1.0 : 0.0;
  return {-(t * std::log(q) + (1.0 - t) * std::log(1.0 - q)), -t / q + (1.0 - t) / (1.0 - q)};
}

struct RmsPropConfig {
  double learning_rate = 1e-3;
  double rho = 0.9;
  double epsilon = 1e-8;
};

/// s <- rho s + (1 - rho) g^2;  theta <- theta - lr g / sqrt(s + eps).
inline void rmsprop_step(std::span<double> param, std::span<const double> grad, std::span<double> state, const RmsPropConfig& cfg)
{
  if (param.size() != grad.size() || param.size() != state.size()) fail(ErrorCode::DimMismatch, "RMSprop shapes differ");
  for (std::size_t k = 0; k < param.size(); ++k) {
    state[k] = cfg.rho * state[k] + (1.0 - cfg.rho) * grad[k] * grad[k];
    param[k] -= cfg.learning_rate * grad[k] / std::sqrt(state[k] + cfg.epsilon);
  }
}

class RmsProp {
 public:
  RmsProp(const ParamList& params, RmsPropConfig cfg) : cfg_(cfg)
  {
    if (!(cfg.learning_rate > 0.0) || !(cfg.rho > 0.0 && cfg.rho < 1.0) || !(cfg.epsilon > 0.0))
      fail(ErrorCode::Config, "RMSprop needs lr > 0, rho in (0, 1), eps > 0");
    for (const auto& p : params) state_.emplace_back(p.size(), 0.0);
  }

  void step(const ParamList& params, const ParamList& grads)
  {
    if (params.size() != state_.size() || grads.size() != state_.size()) fail(ErrorCode::DimMismatch, "RMSprop tensor count changed");
    for (std::size_t t = 0; t < params.size(); ++t) rmsprop_step(params[t], grads[t], state_[t], cfg_);
  }

 private:
  RmsPropConfig cfg_;
  std::vector<std::vector<double>> state_;
};

inline void scale(const ParamList& tensors, double factor)
{
  for (auto t : tensors)
    for (auto& v : t) v *= factor;
}

// ---- configuration -------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-3;
  double rho = 0.9;
  double epsilon = 1e-8;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::size_t hidden_dim = 16;
  std::vector<std::size_t> fc_sizes = {32, 16};
  double dropout = 0.5;
  double positive_weight = 1.0; // BCE weight on Visible items; 1 = unweighted

  RmsPropConfig rmsprop() const { return {learning_rate, rho, epsilon}; }
};

struct EpochLog {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  double accuracy = 0.0;
};

inline std::string training_log_csv(const std::vector<EpochLog>& log)
{
  std::string out = "epoch,split,loss,accuracy\n";
  for (const auto& e : log)
    out += std::to_string(e.epoch) + "," + e.split + "," + io::format_double(e.loss) + "," + io::format_double(e.accuracy) + "\n";
  return out;
}

struct Prediction {
  std::string action_id;
  std::string miniclip_id;
  double p_visible = 0.5;

  bool visible() const { return p_visible >= 0.5; }
};

// ---- text model: embedding -> LSTM -> MLP ------------------------------------------------

struct TextItem {
  std::vector<int> ids; // 0 = pad, trailing pads are ignored
  int label = 0;
  std::string action_id;
};

/// Token-level LSTM classifier over actions. Row 0 of the embedding is the
/// frozen all-zero pad row; row 1 is the unknown-word row.
class TextModel {
 public:
  static constexpr int pad_id = 0;
  static constexpr int unk_id = 1;

  TextModel() = default;

  /// Vocabulary from training actions; rows start from `glove` where the word
  /// is known, otherwise small uniform noise.
  static TextModel create(const std::vector<std::vector<std::string>>& actions, const EmbeddingTable& glove, const TrainConfig& cfg,
                          Init init = Init::Glorot)
  {
    TextModel m;
    m.vocab_ = {"<pad>", "<unk>"};
    std::set<std::string> words;
    for (const auto& a : actions)
      for (const auto& w : a) words.insert(text::fold_case(w));
    for (const auto& w : words) m.vocab_.push_back(w);
    m.rebuild_index();
    Rng rng(stage_seed(cfg.seed, "text-init"));
    const auto E = static_cast<Eigen::Index>(glove.dim());
    if (E == 0) fail(ErrorCode::Config, "text model needs a non-empty embedding table");
    m.embedding_ = Matrix::Zero(static_cast<Eigen::Index>(m.vocab_.size()), E);
    for (std::size_t r = 1; r < m.vocab_.size(); ++r) {
      if (const auto* v = glove.find(m.vocab_[r])) m.embedding_.row(static_cast<Eigen::Index>(r)) = v->transpose();
      else if (init == Init::Glorot)
        for (Eigen::Index c = 0; c < E; ++c) m.embedding_(static_cast<Eigen::Index>(r), c) = rng.uniform(-0.1, 0.1);
    }
    m.lstm_ = LstmParams::create(glove.dim(), cfg.hidden_dim, init, rng);
    m.head_ = MlpParams::create(cfg.hidden_dim, cfg.fc_sizes, cfg.dropout, init, rng);
    return m;
  }

  std::vector<int> encode(const std::vector<std::string>& tokens, std::size_t pad_to = 0) const
  {
    std::vector<int> ids;
    for (const auto& t : tokens) {
      const auto it = index_.find(text::fold_case(t));
      ids.push_back(it == index_.end() ? unk_id : it->second);
    }
    while (ids.size() < pad_to) ids.push_back(pad_id);
    return ids;
  }

  const std::vector<std::string>& vocab() const { return vocab_; }
  const Matrix& embedding() const { return embedding_; }
  Matrix& embedding() { return embedding_; }
  const LstmParams& lstm() const { return lstm_; }
  const MlpParams& head() const { return head_; }

  ParamList parameters()
  {
    ParamList out{view(embedding_)};
    lstm_.collect(out);
    head_.collect(out);
    return out;
  }

  TextModel zeros_like() const
  {
    TextModel z;
    z.vocab_ = vocab_;
    z.index_ = index_;
    z.embedding_ = Matrix::Zero(embedding_.rows(), embedding_.cols());
    z.lstm_ = lstm_.zeros_like();
    z.head_ = head_.zeros_like();
    return z;
  }

  /// Token ids up to the first pad.
  static std::span<const int> effective(std::span<const int> ids)
  {
    const auto it = std::find(ids.begin(), ids.end(), pad_id);
    return ids.first(static_cast<std::size_t>(it - ids.begin()));
  }

  double forward(const TextItem& item, Mode mode, Rng* rng = nullptr, LstmCache* lc = nullptr, MlpCache* mc = nullptr) const
  {
    const auto ids = effective(item.ids);
    if (ids.empty()) fail(ErrorCode::EmptySequence, "action has no tokens");
    std::vector<Vector> xs;
    for (int id : ids) {
      if (id < 0 || id >= embedding_.rows()) fail(ErrorCode::DimMismatch, "token id out of range");
      xs.push_back(embedding_.row(id).transpose());
    }
    const Vector h = lstm_forward(lstm_, xs, lc);
    return mlp_forward(head_, h, mode, rng, mc).p;
  }

  double predict(const TextItem& item) const { return forward(item, Mode::Eval); }

  /// Adds this item's loss gradient to `grads`; returns the loss.
  double accumulate(const TextItem& item, TextModel& grads, Rng& rng, const TrainConfig& cfg) const
  {
    LstmCache lc;
    MlpCache mc;
    const double p = forward(item, Mode::Train, &rng, &lc, &mc);
    const auto lg = bce_loss(p, item.label);
    const double w = item.label ? cfg.positive_weight : 1.0;
    Vector dh;
    mlp_backward(head_, mc, w * lg.dp * p * (1.0 - p), grads.head_, &dh);
    std::vector<Vector> dxs;
    lstm_backward(lstm_, lc, dh, grads.lstm_, &dxs);
    const auto ids = effective(item.ids);
    for (std::size_t t = 0; t < ids.size(); ++t)
      if (ids[t] != pad_id) grads.embedding_.row(ids[t]) += dxs[t].transpose();
    return w * lg.loss;
  }

  nlohmann::json header() const
  {
    return {{"architecture", "text_lstm"},
            {"embedding_dim", embedding_.cols()},
            {"hidden_dim", lstm_.hidden_dim()},
            {"fc_sizes", hidden_sizes()},
            {"dropout", head_.dropout.empty() ? 0.0 : head_.dropout.front()},
            {"vocab", vocab_}};
  }

  static TextModel from_header(const nlohmann::json& h)
  {
    TextModel m;
    m.vocab_ = io::field<std::vector<std::string>>(h, "vocab");
    m.rebuild_index();
    TrainConfig cfg;
    cfg.hidden_dim = io::field<std::size_t>(h, "hidden_dim");
    cfg.fc_sizes = io::field<std::vector<std::size_t>>(h, "fc_sizes");
    cfg.dropout = io::field<double>(h, "dropout");
    Rng rng(0);
    const auto E = io::field<std::size_t>(h, "embedding_dim");
    m.embedding_ = Matrix::Zero(static_cast<Eigen::Index>(m.vocab_.size()), static_cast<Eigen::Index>(E));
    m.lstm_ = LstmParams::create(E, cfg.hidden_dim, Init::Zero, rng);
    m.head_ = MlpParams::create(cfg.hidden_dim, cfg.fc_sizes, cfg.dropout, Init::Zero, rng);
    return m;
  }

 private:
  std::vector<std::size_t> hidden_sizes() const
  {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l + 1 < head_.layers.size(); ++l) out.push_back(static_cast<std::size_t>(head_.layers[l].W.rows()));
    return out;
  }

  void rebuild_index()
  {
    index_.clear();
    for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<int>(i));
  }

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  Matrix embedding_;
  LstmParams lstm_;
  MlpParams head_;
};

// ---- fusion model: video LSTM + action text + extras -> MLP --------------------------------

enum class Modality { Multimodal, TextOnly, VideoOnly };

inline std::string_view to_string(Modality m)
{
  switch (m) {
    case Modality::Multimodal: return "multimodal";
    case Modality::TextOnly: return "text";
    case Modality::VideoOnly: return "video";
  }
  return "?";
}

inline Modality parse_modality(std::string_view s)
{
  if (s == "multimodal") return Modality::Multimodal;
  if (s == "text") return Modality::TextOnly;
  if (s == "video") return Modality::VideoOnly;
  fail(ErrorCode::Config, "unknown modality '" + std::string(s) + "'");
}

enum class Extra { Pos, ContextS, ContextA, Concreteness };

inline std::string_view to_string(Extra e)
{
  switch (e) {
    case Extra::Pos: return "pos";
    case Extra::ContextS: return "context_s";
    case Extra::ContextA: return "context_a";
    case Extra::Concreteness: return "concreteness";
  }
  return "?";
}

inline std::set<Extra> parse_extras(std::string_view list)
{
  std::set<Extra> out;
  for (const auto& raw : text::split(list, ',')) {
    const auto s = text::trim(raw);
    if (s.empty()) continue;
    if (s == "pos") out.insert(Extra::Pos);
    else if (s == "context_s") out.insert(Extra::ContextS);
    else if (s == "context_a") out.insert(Extra::ContextA);
    else if (s == "concreteness") out.insert(Extra::Concreteness);
    else fail(ErrorCode::Config, "unknown extra '" + s + "' (pos, context_s, context_a, concreteness)");
  }
  return out;
}

inline std::vector<std::string> extras_names(const std::set<Extra>& extras)
{
  std::vector<std::string> out;
  for (auto e : extras) out.emplace_back(to_string(e));
  return out;
}

/// One (miniclip, action) pair.
struct MultimodalItem {
  std::string action_id;
  std::string miniclip_id;
  ActionFeatures text;
  std::shared_ptr<const FeatureRows> video;
  int label = 0;
};

struct FusionSpec {
  Modality modality = Modality::Multimodal;
  std::size_t video_dim = 0;   // dim_frame + dim_seq
  std::size_t text_dim = 0;    // action vector
  std::size_t pos_dim = 0;
  std::size_t context_dim = 0; // each context vector
  std::set<Extra> extras;

  bool uses_video() const { return modality != Modality::TextOnly; }
  bool uses_text() const { return modality != Modality::VideoOnly; }

  std::size_t extras_dim() const
  {
    std::size_t d = 0;
    for (auto e : extras) {
      switch (e) {
        case Extra::Pos: d += pos_dim; break;
        case Extra::ContextS:
        case Extra::ContextA: d += 2 * context_dim; break;
        case Extra::Concreteness: d += 1; break;
      }
    }
    return d;
  }
};

/// Action vector followed by the selected extras in canonical order. The
/// concreteness extra is score / 5, or 0 when the action has no score.
inline Vector text_input(const ActionFeatures& f, const FusionSpec& spec)
{
  auto check = [](const Vector& v, std::size_t dim, std::string_view what) {
    if (static_cast<std::size_t>(v.size()) != dim)
      fail(ErrorCode::ExtrasDimMismatch, std::string(what) + " has dim " + std::to_string(v.size()) + ", model expects " + std::to_string(dim));
  };
  check(f.action_emb, spec.text_dim, "action vector");
  std::vector<const Vector*> parts{&f.action_emb};
  Vector conc(1);
  for (auto e : spec.extras) {
    switch (e) {
      case Extra::Pos:
        check(f.pos_emb, spec.pos_dim, "pos");
        parts.push_back(&f.pos_emb);
        break;
      case Extra::ContextS:
        check(f.context_s.first, spec.context_dim, "context_s");
        check(f.context_s.second, spec.context_dim, "context_s");
        parts.insert(parts.end(), {&f.context_s.first, &f.context_s.second});
        break;
      case Extra::ContextA:
        check(f.context_a.first, spec.context_dim, "context_a");
        check(f.context_a.second, spec.context_dim, "context_a");
        parts.insert(parts.end(), {&f.context_a.first, &f.context_a.second});
        break;
      case Extra::Concreteness:
        conc[0] = f.concreteness ? *f.concreteness / 5.0 : 0.0;
        parts.push_back(&conc);
        break;
    }
  }
  Eigen::Index n = 0;
  for (const auto* p : parts) n += p->size();
  Vector out(n);
  Eigen::Index at = 0;
  for (const auto* p : parts) {
    out.segment(at, p->size()) = *p;
    at += p->size();
  }
  return out;
}

inline std::vector<Vector> video_rows(const MultimodalItem& item, std::size_t expected_dim)
{
  if (!item.video || item.video->rows() == 0)
    fail(ErrorCode::MissingFeatureBank, "no video features for miniclip '" + item.miniclip_id + "'");
  if (item.video->width() != expected_dim)
    fail(ErrorCode::DimMismatch, "video rows for " + item.miniclip_id + " have dim " + std::to_string(item.video->width()) +
                                     ", model expects " + std::to_string(expected_dim));
  std::vector<Vector> xs;
  xs.reserve(item.video->rows());
  for (std::size_t r = 0; r < item.video->rows(); ++r) {
    const auto row = item.video->row(r);
    Vector x(static_cast<Eigen::Index>(row.size()));
    for (std::size_t k = 0; k < row.size(); ++k) x[static_cast<Eigen::Index>(k)] = row[k];
    xs.push_back(std::move(x));
  }
  return xs;
}

/// Video rows -> LSTM (last hidden state), concatenated with the action text
/// vector and extras, -> MLP -> sigmoid. The single-modality variants drop
/// one side of the concatenation.
class FusionModel {
 public:
  FusionModel() = default;

  static FusionModel create(const FusionSpec& spec, const TrainConfig& cfg, Init init = Init::Glorot)
  {
    FusionModel m;
    m.spec_ = spec;
    Rng rng(stage_seed(cfg.seed, "fusion-init"));
    std::size_t head_in = 0;
    if (spec.uses_video()) {
      if (spec.video_dim == 0) fail(ErrorCode::MissingFeatureBank, "video modality needs a non-zero video dim");
      m.video_lstm_ = LstmParams::create(spec.video_dim, cfg.hidden_dim, init, rng);
      head_in += cfg.hidden_dim;
    }
    if (spec.uses_text()) head_in += spec.text_dim + spec.extras_dim();
    if (head_in == 0) fail(ErrorCode::Config, "fusion head has no inputs");
    m.head_ = MlpParams::create(head_in, cfg.fc_sizes, cfg.dropout, init, rng);
    return m;
  }

  const FusionSpec& spec() const { return spec_; }
  const MlpParams& head() const { return head_; }
  MlpParams& head() { return head_; }
  const LstmParams& video_lstm() const { return video_lstm_; }

  ParamList parameters()
  {
    ParamList out;
    if (spec_.uses_video()) video_lstm_.collect(out);
    head_.collect(out);
    return out;
  }

  FusionModel zeros_like() const
  {
    FusionModel z;
    z.spec_ = spec_;
    if (spec_.uses_video()) z.video_lstm_ = video_lstm_.zeros_like();
    z.head_ = head_.zeros_like();
    return z;
  }

  double forward(const MultimodalItem& item, Mode mode, Rng* rng = nullptr, LstmCache* lc = nullptr, MlpCache* mc = nullptr) const
  {
    Vector video_h, txt;
    if (spec_.uses_video()) video_h = lstm_forward(video_lstm_, video_rows(item, spec_.video_dim), lc);
    if (spec_.uses_text()) txt = text_input(item.text, spec_);
    Vector x(video_h.size() + txt.size());
    x << video_h, txt;
    return mlp_forward(head_, x, mode, rng, mc).p;
  }

  double predict(const MultimodalItem& item) const { return forward(item, Mode::Eval); }

  double accumulate(const MultimodalItem& item, FusionModel& grads, Rng& rng, const TrainConfig& cfg) const
  {
    LstmCache lc;
    MlpCache mc;
    const double p = forward(item, Mode::Train, &rng, &lc, &mc);
    const auto lg = bce_loss(p, item.label);
    const double w = item.label ? cfg.positive_weight : 1.0;
    Vector dx;
    mlp_backward(head_, mc, w * lg.dp * p * (1.0 - p), grads.head_, &dx);
    if (spec_.uses_video()) {
      const auto H = static_cast<Eigen::Index>(video_lstm_.hidden_dim());
      lstm_backward(video_lstm_, lc, dx.head(H), grads.video_lstm_);
    }
    return w * lg.loss;
  }

  nlohmann::json header() const
  {
    std::vector<std::size_t> fc;
    for (std::size_t l = 0; l + 1 < head_.layers.size(); ++l) fc.push_back(static_cast<std::size_t>(head_.layers[l].W.rows()));
    return {{"architecture", "fusion"},
            {"modality", to_string(spec_.modality)},
            {"video_dim", spec_.video_dim},
            {"text_dim", spec_.text_dim},
            {"pos_dim", spec_.pos_dim},
            {"context_dim", spec_.context_dim},
            {"extras", extras_names(spec_.extras)},
            {"hidden_dim", spec_.uses_video() ? video_lstm_.hidden_dim() : 0},
            {"fc_sizes", fc},
            {"dropout", head_.dropout.empty() ? 0.0 : head_.dropout.front()}};
  }

  static FusionModel from_header(const nlohmann::json& h)
  {
    FusionSpec spec;
    spec.modality = parse_modality(io::field<std::string>(h, "modality"));
    spec.video_dim = io::field<std::size_t>(h, "video_dim");
    spec.text_dim = io::field<std::size_t>(h, "text_dim");
    spec.pos_dim = io::field<std::size_t>(h, "pos_dim");
    spec.context_dim = io::field<std::size_t>(h, "context_dim");
    spec.extras = parse_extras(text::join(io::field<std::vector<std::string>>(h, "extras"), ","));
    TrainConfig cfg;
    cfg.hidden_dim = io::field<std::size_t>(h, "hidden_dim");
    cfg.fc_sizes = io::field<std::vector<std::size_t>>(h, "fc_sizes");
    cfg.dropout = io::field<double>(h, "dropout");
    return create(spec, cfg, Init::Zero);
  }

 private:
  FusionSpec spec_;
  LstmParams video_lstm_;
  MlpParams head_;
};

// ---- training ------------------------------------------------------------------------

template <class Model, class Item> double accuracy(const Model& model, std::span<const Item> items)
{
  if (items.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& it : items) correct += ((model.predict(it) >= 0.5) == (it.label != 0)) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

template <class Model, class Item> double mean_loss(const Model& model, std::span<const Item> items)
{
  if (items.empty()) return 0.0;
  double total = 0.0;
  for (const auto& it : items) total += bce_loss(model.predict(it), it.label).loss;
  return total / static_cast<double>(items.size());
}

/// One mini-batch RMSprop step on the mean BCE of `batch`; returns that mean loss.
template <class Model, class Item>
double train_step(Model& model, std::span<const Item> batch, RmsProp& opt, Rng& dropout_rng, const TrainConfig& cfg)
{
  Model grads = model.zeros_like();
  double loss = 0.0;
  for (const auto& item : batch) loss += model.accumulate(item, grads, dropout_rng, cfg);
  const double inv = 1.0 / static_cast<double>(batch.size());
  auto g = grads.parameters();
  scale(g, inv);
  opt.step(model.parameters(), g);
  return loss * inv;
}

/// Mini-batch RMSprop on BCE; shuffling and dropout draw from streams derived
/// from `cfg.seed`, so a fixed seed gives bit-identical weights.
template <class Model, class Item>
std::vector<EpochLog> train(Model& model, std::span<const Item> train_items, const TrainConfig& cfg, std::span<const Item> val_items = {})
{
  if (train_items.empty()) fail(ErrorCode::EmptyDataset, "no training items");
  if (cfg.batch_size == 0) fail(ErrorCode::Config, "batch size must be positive");
  RmsProp opt(model.parameters(), cfg.rmsprop());
  Rng order_rng(stage_seed(cfg.seed, "order"));
  Rng dropout_rng(stage_seed(cfg.seed, "dropout"));
  std::vector<std::size_t> order = iota_indices(train_items.size());
  std::vector<EpochLog> log;
  std::vector<Item> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(train_items[order[k]]);
      loss_sum += train_step(model, std::span<const Item>(batch), opt, dropout_rng, cfg) * static_cast<double>(stop - start);
    }
    log.push_back({epoch, "train", loss_sum / static_cast<double>(order.size()), accuracy(model, train_items)});
    if (!val_items.empty()) log.push_back({epoch, "val", mean_loss(model, val_items), accuracy(model, val_items)});
  }
  return log;
}

inline FusionModel train_multimodal(std::span<const MultimodalItem> items, const FusionSpec& spec, const TrainConfig& cfg,
                                    std::span<const MultimodalItem> val = {}, std::vector<EpochLog>* log = nullptr)
{
  if (items.empty()) fail(ErrorCode::EmptyDataset, "no training items");
  auto model = FusionModel::create(spec, cfg);
  auto l = train(model, items, cfg, val);
  if (log) *log = std::move(l);
  return model;
}

inline Prediction predict_visibility(const FusionModel& model, const MultimodalItem& item)
{
  return {item.action_id, item.miniclip_id, model.predict(item)};
}

inline std::vector<Prediction> predict_visibility(const FusionModel& model, std::span<const MultimodalItem> items)
{
  std::vector<Prediction> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(predict_visibility(model, it));
  return out;
}

struct HyperGrid {
  std::vector<std::size_t> epochs = {10};
  std::vector<std::size_t> batch_sizes = {32};
  std::vector<std::size_t> hidden_dims = {16};
  std::vector<std::vector<std::size_t>> fc_sizes = {{32, 16}};
};

struct GridSearchResult {
  TrainConfig best;
  double best_val_accuracy = -1.0;
  std::vector<std::pair<TrainConfig, double>> trials;
};

/// Exhaustive search scored on validation accuracy; the first best wins ties.
inline GridSearchResult grid_search(std::span<const MultimodalItem> train_items, std::span<const MultimodalItem> val_items,
                                    const FusionSpec& spec, const TrainConfig& base, const HyperGrid& grid)
{
  if (val_items.empty()) fail(ErrorCode::EmptyValidation, "grid search needs validation items");
  GridSearchResult out;
  for (auto e : grid.epochs)
    for (auto b : grid.batch_sizes)
      for (auto h : grid.hidden_dims)
        for (const auto& fc : grid.fc_sizes) {
          TrainConfig cfg = base;
          cfg.epochs = e;
          cfg.batch_size = b;
          cfg.hidden_dim = h;
          cfg.fc_sizes = fc;
          const auto model = train_multimodal(train_items, spec, cfg);
          const double acc = accuracy(model, val_items);
          out.trials.emplace_back(cfg, acc);
          if (acc > out.best_val_accuracy) {
            out.best_val_accuracy = acc;
            out.best = cfg;
          }
        }
  return out;
}

// ---- checkpoints (VNF1) ---------------------------------------------------------------

/// magic `VNF1`, u32 LE header length, JSON header, then every parameter
/// tensor (column-major) as little-endian float64, in declaration order.
inline std::string encode_checkpoint(nlohmann::json header, const ParamList& params)
{
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& p : params) shapes.push_back(p.size());
  header["param_sizes"] = shapes;
  header["layout"] = "column-major";
  const std::string h = header.dump();
  std::string out = "VNF1";
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((h.size() >> (8 * i)) & 0xFF));
  out += h;
  for (const auto& p : params)
    for (double v : p) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
  return out;
}

inline nlohmann::json checkpoint_header(std::string_view bytes)
{
  if (bytes.size() < 4 || bytes.substr(0, 4) != "VNF1") fail(ErrorCode::BadMagic, "not a VNF1 checkpoint");
  if (bytes.size() < 8) fail(ErrorCode::TruncatedFile, "checkpoint header truncated");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 + i])) << (8 * i);
  if (bytes.size() < 8 + static_cast<std::size_t>(len)) fail(ErrorCode::TruncatedFile, "checkpoint header truncated");
  try {
    return nlohmann::json::parse(bytes.substr(8, len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("checkpoint header: ") + e.what());
  }
}

inline void decode_checkpoint_params(std::string_view bytes, const ParamList& params)
{
  const auto header = checkpoint_header(bytes);
  const auto sizes = io::field<std::vector<std::size_t>>(header, "param_sizes");
  if (sizes.size() != params.size()) fail(ErrorCode::DimMismatch, "checkpoint tensor count does not match the architecture");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 + i])) << (8 * i);
  std::size_t pos = 8 + len;
  std::size_t total = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (sizes[t] != params[t].size()) fail(ErrorCode::DimMismatch, "checkpoint tensor " + std::to_string(t) + " has the wrong size");
    total += sizes[t];
  }
  if (bytes.size() < pos + 8 * total) fail(ErrorCode::TruncatedFile, "checkpoint parameters truncated");
  if (bytes.size() > pos + 8 * total) fail(ErrorCode::DimMismatch, "trailing bytes after checkpoint parameters");
  for (auto p : params)
    for (auto& v : p) {
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
      v = std::bit_cast<double>(bits);
      pos += 8;
    }
}

template <class Model> void save_checkpoint(const std::filesystem::path& path, Model& model, std::uint64_t seed)
{
  auto header = model.header();
  header["seed"] = seed;
  io::write_file_atomic(path, encode_checkpoint(header, model.parameters()));
}

/// Either architecture, chosen by the header.
struct LoadedModel {
  std::optional<FusionModel> fusion;
  std::optional<TextModel> text;
  nlohmann::json header;
};

inline LoadedModel load_checkpoint(const std::filesystem::path& path)
{
  const auto bytes = io::read_file(path);
  LoadedModel out;
  out.header = checkpoint_header(bytes);
  const auto arch = io::field<std::string>(out.header, "architecture");
  if (arch == "fusion") {
    out.fusion = FusionModel::from_header(out.header);
    decode_checkpoint_params(bytes, out.fusion->parameters());
  } else if (arch == "text_lstm") {
    out.text = TextModel::from_header(out.header);
    decode_checkpoint_params(bytes, out.text->parameters());
  } else {
    fail(ErrorCode::Parse, "unknown checkpoint architecture '" + arch + "'");
  }
  return out;
}

} // namespace vlogvis::nn
