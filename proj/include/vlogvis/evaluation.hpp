#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "annotation.hpp"
#include "error.hpp"
#include "io.hpp"
#include "text.hpp"

namespace vlogvis {

/// Visible is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> gold)
{
  if (predicted.size() != gold.size()) fail(ErrorCode::LengthMismatch, "predictions and gold labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predicted[i] != 0, g = gold[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// Zero denominators give 0.
inline Metrics metrics(const ConfusionCounts& c)
{
  auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  Metrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

inline Metrics metrics(std::span<const int> predicted, std::span<const int> gold)
{
  if (gold.empty()) fail(ErrorCode::LengthMismatch, "no items to evaluate");
  return metrics(confusion(predicted, gold));
}

/// Most frequent training label; ties go to Visible.
struct MajorityBaseline {
  int label = 1;

  int predict() const { return label; }
  std::vector<int> predict(std::size_t n) const { return std::vector<int>(n, label); }
};

inline MajorityBaseline majority_baseline(std::span<const int> train_labels)
{
  std::size_t pos = 0;
  for (int y : train_labels) pos += y != 0 ? 1 : 0;
  return {2 * pos >= train_labels.size() ? 1 : 0};
}

// ---- paired t-test ---------------------------------------------------------------

namespace detail {

/// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x)
{
  constexpr double tiny = 1e-300;
  constexpr double tol = 1e-12;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < tol) break;
  }
  return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x)
{
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
inline double student_t_two_tailed(double t, double dof)
{
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

struct TTestResult {
  double t_statistic = 0.0;
  std::size_t dof = 0;
  double p_two_tailed = 1.0;
  bool infinite_t = false; // zero-variance differences with a nonzero mean
};

/// d = a - b; t = mean(d) / (sd(d) / sqrt(n)) with the sample sd.
inline TTestResult paired_ttest(std::span<const double> a, std::span<const double> b)
{
  if (a.size() != b.size()) fail(ErrorCode::LengthMismatch, "paired samples differ in length");
  if (a.size() < 2) fail(ErrorCode::DegeneratePairs, "paired t-test needs at least 2 pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = (a[i] - b[i]) - mean;
    ss += e * e;
  }
  TTestResult r;
  r.dof = a.size() - 1;
  if (ss == 0.0) {
    if (mean == 0.0) return r;
    r.infinite_t = true;
    r.t_statistic = mean > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p_two_tailed = 0.0;
    return r;
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  r.t_statistic = mean / (sd / std::sqrt(n));
  r.p_two_tailed = std::clamp(student_t_two_tailed(r.t_statistic, static_cast<double>(r.dof)), 0.0, 1.0);
  return r;
}

/// Per-item 0/1 correctness, the pairing unit for comparing two systems.
inline std::vector<double> correctness(std::span<const int> predicted, std::span<const int> gold)
{
  if (predicted.size() != gold.size()) fail(ErrorCode::LengthMismatch, "predictions and gold labels differ in length");
  std::vector<double> out;
  out.reserve(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) out.push_back((predicted[i] != 0) == (gold[i] != 0) ? 1.0 : 0.0);
  return out;
}

// ---- reports ------------------------------------------------------------------

struct ResultRow {
  std::string method;
  std::string input_features;
  Metrics m;
};

inline std::string results_csv(std::span<const ResultRow> rows)
{
  std::string out = "method,input-features,accuracy,precision,recall,f1\n";
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  for (const auto& r : rows)
    out += quote(r.method) + "," + quote(r.input_features) + "," + io::format_double(r.m.accuracy) + "," +
           io::format_double(r.m.precision) + "," + io::format_double(r.m.recall) + "," + io::format_double(r.m.f1) + "\n";
  return out;
}

struct VideoSummary {
  std::string video_id;
  double duration_s = 0.0;
  std::size_t words = 0;
};

struct SplitStats {
  std::size_t miniclips = 0;
  std::size_t actions = 0;

  double actions_per_miniclip() const { return miniclips == 0 ? 0.0 : static_cast<double>(actions) / static_cast<double>(miniclips); }
};

struct DatasetStats {
  std::size_t videos = 0;
  double hours = 0.0;
  std::size_t transcript_words = 0;
  std::size_t miniclips = 0;
  std::size_t actions = 0;
  std::size_t visible = 0;
  std::size_t not_visible = 0;
  std::map<std::string, SplitStats> splits; // keyed by split name
};

/// Counts over the labeled corpus. `split_of` maps miniclip id to split name;
/// miniclips absent from it are counted only in the totals.
inline DatasetStats dataset_stats(std::span<const VideoSummary> videos, std::span<const AggregatedLabel> labels,
                                  const std::map<std::string, std::string>& split_of = {})
{
  DatasetStats s;
  s.videos = videos.size();
  double seconds = 0.0;
  for (const auto& v : videos) {
    seconds += v.duration_s;
    s.transcript_words += v.words;
  }
  s.hours = seconds / 3600.0;
  std::set<std::string> clips;
  std::map<std::string, std::set<std::string>> split_clips;
  for (const auto& l : labels) {
    clips.insert(l.miniclip_id);
    ++s.actions;
    (l.label == BinaryLabel::Visible ? s.visible : s.not_visible)++;
    if (const auto it = split_of.find(l.miniclip_id); it != split_of.end()) {
      split_clips[it->second].insert(l.miniclip_id);
      ++s.splits[it->second].actions;
    }
  }
  s.miniclips = clips.size();
  for (const auto& [name, set] : split_clips) s.splits[name].miniclips = set.size();
  return s;
}

inline std::string stats_markdown(const DatasetStats& s)
{
  std::string out = "| statistic | value |\n|---|---|\n";
  auto row = [&](const std::string& k, const std::string& v) { out += "| " + k + " | " + v + " |\n"; };
  row("videos", std::to_string(s.videos));
  row("hours", io::format_double(s.hours));
  row("transcript words", std::to_string(s.transcript_words));
  row("miniclips", std::to_string(s.miniclips));
  row("actions", std::to_string(s.actions));
  row("visible actions", std::to_string(s.visible));
  row("non-visible actions", std::to_string(s.not_visible));
  for (const auto& [name, sp] : s.splits) {
    row(name + " miniclips", std::to_string(sp.miniclips));
    row(name + " actions", std::to_string(sp.actions));
    row(name + " actions per miniclip", io::format_double(sp.actions_per_miniclip()));
  }
  return out;
}

inline std::string stats_csv(const DatasetStats& s)
{
  std::string out = "statistic,value\n";
  auto row = [&](const std::string& k, const std::string& v) { out += k + "," + v + "\n"; };
  row("videos", std::to_string(s.videos));
  row("hours", io::format_double(s.hours));
  row("transcript_words", std::to_string(s.transcript_words));
  row("miniclips", std::to_string(s.miniclips));
  row("actions", std::to_string(s.actions));
  row("visible", std::to_string(s.visible));
  row("not_visible", std::to_string(s.not_visible));
  for (const auto& [name, sp] : s.splits) {
    row(name + "_miniclips", std::to_string(sp.miniclips));
    row(name + "_actions", std::to_string(sp.actions));
    row(name + "_actions_per_miniclip", io::format_double(sp.actions_per_miniclip()));
  }
  return out;
}

/// Action strings (case-folded, whitespace-normalized) labeled Visible in one
/// miniclip and not visible in another. `text_of` maps action id to text.
inline std::vector<std::string> ambiguous_actions(std::span<const AggregatedLabel> labels, const std::map<std::string, std::string>& text_of)
{
  std::map<std::string, std::pair<bool, bool>> seen;
  for (const auto& l : labels) {
    const auto it = text_of.find(l.action_id);
    const std::string key = text::normalize_phrase(it == text_of.end() ? l.action_id : it->second);
    auto& s = seen[key];
    (l.label == BinaryLabel::Visible ? s.first : s.second) = true;
  }
  std::vector<std::string> out;
  for (const auto& [k, s] : seen)
    if (s.first && s.second) out.push_back(k);
  return out;
}

} // namespace vlogvis
