#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "error.hpp"
#include "feature_bank.hpp"
#include "io.hpp"
#include "rng.hpp"

namespace vlogvis {

/// Binary visibility decision with the raw quantity it came from.
struct Decision {
  bool visible = false;
  double margin = 0.0; // w.x + b for linear models, score - theta for thresholds
};

// ---- threshold models --------------------------------------------------------

struct ThresholdModel {
  double theta = 0.0;
};

/// lo, lo+step, ..., hi with each value snapped to 1e-9 so that e.g. 3.9 on
/// the grid is the same double as the literal 3.9.
inline std::vector<double> make_grid(double lo, double hi, double step)
{
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
  return out;
}

inline std::vector<double> concreteness_grid() { return make_grid(3.0, 5.0, 0.05); }
inline std::vector<double> similarity_grid() { return make_grid(0.0, 1.0, 0.05); }

/// Score at or above theta is Visible; a missing score is NotVisible.
inline Decision predict(const ThresholdModel& m, std::optional<double> score)
{
  if (!score) return {false, -m.theta};
  return {*score >= m.theta, *score - m.theta};
}

/// Grid value with the best accuracy on the given (validation) items; ties go
/// to the smallest threshold.
inline ThresholdModel tune_threshold(std::span<const std::optional<double>> scores, std::span<const int> labels,
                                     std::span<const double> grid)
{
  if (scores.empty()) fail(ErrorCode::EmptyValidation, "no validation items");
  if (scores.size() != labels.size()) fail(ErrorCode::LengthMismatch, "scores and labels differ in length");
  if (grid.empty()) fail(ErrorCode::EmptyValidation, "empty threshold grid");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  double best_theta = sorted.front();
  std::size_t best_correct = 0;
  bool first = true;
  for (double theta : sorted) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
      correct += (predict(ThresholdModel{theta}, scores[i]).visible == (labels[i] != 0)) ? 1 : 0;
    if (first || correct > best_correct) {
      best_correct = correct;
      best_theta = theta;
      first = false;
    }
  }
  return {best_theta};
}

enum class SimilarityMode { Wup, Cosine };

/// Highest similarity between any action noun and any detected object label.
/// Words unknown to the taxonomy / embedding table are skipped (after trying
/// their lemma forms); empty when no pair can be scored.
inline std::optional<double> object_match_score(std::span<const std::string> nouns, std::span<const std::string> detected_labels,
                                                SimilarityMode mode, const Taxonomy* tax, const EmbeddingTable* emb)
{
  if (nouns.empty() || detected_labels.empty()) return std::nullopt;
  auto resolve_tax = [&](const std::string& w) -> std::optional<std::string> {
    if (tax->contains(w)) return w;
    for (const auto& l : lemma_candidates(w))
      if (tax->contains(l)) return l;
    return std::nullopt;
  };
  auto resolve_emb = [&](const std::string& w) -> const Vector* {
    if (const auto* v = emb->find(w)) return v;
    for (const auto& l : lemma_candidates(w))
      if (const auto* v = emb->find(l)) return v;
    return nullptr;
  };

  std::optional<double> best;
  auto offer = [&](double s) {
    if (!best || s > *best) best = s;
  };
  for (const auto& noun : nouns) {
    for (const auto& label : detected_labels) {
      if (text::fold_case(noun) == text::fold_case(label)) {
        offer(1.0);
        continue;
      }
      if (mode == SimilarityMode::Wup) {
        if (!tax) fail(ErrorCode::Config, "WUP matching needs a taxonomy");
        const auto a = resolve_tax(noun), b = resolve_tax(label);
        if (a && b) offer(wup_similarity(*tax, *a, *b));
      } else {
        if (!emb) fail(ErrorCode::Config, "cosine matching needs an embedding table");
        const auto* a = resolve_emb(noun);
        const auto* b = resolve_emb(label);
        if (a && b && a->norm() > 0.0 && b->norm() > 0.0) offer(cosine(*a, *b));
      }
    }
  }
  if (best) best = std::min(*best, 1.0);
  return best;
}

// ---- linear margin classifier ---------------------------------------------------

struct LinearModel {
  Vector weights;
  double bias = 0.0;
  double C = 1.0;
  bool constant = false; // trained on single-class data, predicts that class
};

inline Decision predict(const LinearModel& m, const Vector& x)
{
  if (x.size() != m.weights.size())
    fail(ErrorCode::DimMismatch, "feature dim " + std::to_string(x.size()) + " vs model dim " + std::to_string(m.weights.size()));
  const double margin = m.weights.dot(x) + m.bias;
  return {margin >= 0.0, margin};
}

inline std::vector<Decision> predict_batch(const LinearModel& m, std::span<const Vector> xs)
{
  std::vector<Decision> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(predict(m, x));
  return out;
}

struct LinearTrainOptions {
  std::vector<double> C_grid = {0.01, 0.1, 1.0, 10.0, 100.0};
  std::size_t folds = 5;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
};

struct LinearTrainResult {
  LinearModel model;
  std::vector<double> cv_accuracy; // aligned with the sorted C grid
  std::vector<double> C_grid;      // sorted ascending
  double best_cv_accuracy = 0.0;
  bool singular = false; // every label identical
};

namespace detail {

/// Pegasos stochastic sub-gradient descent on the hinge loss, bias folded in as
/// a constant feature. lambda = 1 / (C n).
inline LinearModel pegasos(std::span<const Vector> X, std::span<const int> y, std::span<const std::size_t> idx, double C,
                           std::size_t epochs, std::uint64_t seed)
{
  const auto d = X.front().size();
  const double n = static_cast<double>(idx.size());
  const double lambda = 1.0 / (C * n);
  Vector w = Vector::Zero(d + 1);
  Vector xa(d + 1);
  Rng rng(seed);
  std::vector<std::size_t> order(idx.begin(), idx.end());
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (auto i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double yi = y[i] ? 1.0 : -1.0;
      xa.head(d) = X[i];
      xa[d] = 1.0;
      const double margin = yi * w.dot(xa);
      w *= (1.0 - 1.0 / static_cast<double>(t));
      if (margin < 1.0) w += eta * yi * xa;
      const double radius = 1.0 / std::sqrt(lambda);
      const double norm = w.norm();
      if (norm > radius) w *= radius / norm;
    }
  }
  LinearModel m;
  m.weights = w.head(d);
  m.bias = w[d];
  m.C = C;
  return m;
}

} // namespace detail

/// Pick C by k-fold cross-validated accuracy (ties to the smaller C), then
/// retrain on all rows.
inline LinearTrainResult train_linear(std::span<const Vector> X, std::span<const int> y, const LinearTrainOptions& opt = {})
{
  if (X.size() != y.size()) fail(ErrorCode::LengthMismatch, "X and y differ in length");
  if (opt.folds < 2 || X.size() < opt.folds) fail(ErrorCode::EmptyDataset, "need at least `folds` rows for cross-validation");
  if (opt.C_grid.empty()) fail(ErrorCode::Config, "empty C grid");
  for (double c : opt.C_grid)
    if (!(c > 0.0)) fail(ErrorCode::Config, "C must be positive");
  const auto d = X.front().size();
  for (const auto& x : X)
    if (x.size() != d) fail(ErrorCode::DimMismatch, "feature rows differ in dim");

  LinearTrainResult out;
  out.C_grid = opt.C_grid;
  std::sort(out.C_grid.begin(), out.C_grid.end());

  const auto positives = static_cast<std::size_t>(std::count_if(y.begin(), y.end(), [](int v) { return v != 0; }));
  if (positives == 0 || positives == y.size()) {
    out.singular = true;
    out.model.weights = Vector::Zero(d);
    out.model.bias = positives ? 1.0 : -1.0;
    out.model.C = out.C_grid.front();
    out.model.constant = true;
    out.best_cv_accuracy = 1.0;
    out.cv_accuracy.assign(out.C_grid.size(), 1.0);
    return out;
  }

  std::vector<std::size_t> perm = iota_indices(X.size());
  Rng fold_rng(stage_seed(opt.seed, "cv-folds"));
  fold_rng.shuffle(perm);
  std::vector<std::size_t> fold_of(X.size());
  for (std::size_t p = 0; p < perm.size(); ++p) fold_of[perm[p]] = p % opt.folds;

  std::size_t best = 0;
  for (std::size_t ci = 0; ci < out.C_grid.size(); ++ci) {
    double acc_sum = 0.0;
    for (std::size_t f = 0; f < opt.folds; ++f) {
      std::vector<std::size_t> train, held;
      for (std::size_t i = 0; i < X.size(); ++i) (fold_of[i] == f ? held : train).push_back(i);
      const auto m = detail::pegasos(X, y, train, out.C_grid[ci], opt.epochs, stage_seed(opt.seed, "fold-" + std::to_string(f)));
      std::size_t correct = 0;
      for (auto i : held) correct += predict(m, X[i]).visible == (y[i] != 0) ? 1 : 0;
      acc_sum += static_cast<double>(correct) / static_cast<double>(held.size());
    }
    out.cv_accuracy.push_back(acc_sum / static_cast<double>(opt.folds));
    if (out.cv_accuracy[ci] > out.cv_accuracy[best]) best = ci;
  }
  out.best_cv_accuracy = out.cv_accuracy[best];
  const auto all = iota_indices(X.size());
  out.model = detail::pegasos(X, y, all, out.C_grid[best], opt.epochs, stage_seed(opt.seed, "final"));
  return out;
}

// ---- model files ---------------------------------------------------------------

inline nlohmann::json to_json(const ThresholdModel& m) { return {{"kind", "threshold"}, {"theta", m.theta}}; }

inline nlohmann::json to_json(const LinearModel& m)
{
  return {{"kind", "linear"}, {"weights", vector_to_json(m.weights)}, {"bias", m.bias}, {"C", m.C}, {"constant", m.constant}};
}

inline ThresholdModel threshold_model_from_json(const nlohmann::json& j)
{
  if (io::field<std::string>(j, "kind") != "threshold") fail(ErrorCode::Parse, "not a threshold model");
  return {io::field<double>(j, "theta")};
}

inline LinearModel linear_model_from_json(const nlohmann::json& j)
{
  if (io::field<std::string>(j, "kind") != "linear") fail(ErrorCode::Parse, "not a linear model");
  LinearModel m;
  m.weights = vector_from_json(io::field<nlohmann::json>(j, "weights"));
  m.bias = io::field<double>(j, "bias");
  m.C = io::field<double>(j, "C");
  m.constant = io::field_or<bool>(j, "constant", false);
  if (!(m.C > 0.0)) fail(ErrorCode::Parse, "model C must be positive");
  return m;
}

} // namespace vlogvis
