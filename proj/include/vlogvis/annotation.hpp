#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "io.hpp"
#include "rng.hpp"

namespace vlogvis {

enum class RawLabel { Visible, NotVisible, NotAnAction };
enum class BinaryLabel { Visible, NotVisibleOrNotAction };

inline std::string_view to_string(RawLabel l)
{
  switch (l) {
    case RawLabel::Visible: return "Visible";
    case RawLabel::NotVisible: return "NotVisible";
    case RawLabel::NotAnAction: return "NotAnAction";
  }
  return "?";
}

inline std::string_view to_string(BinaryLabel l) { return l == BinaryLabel::Visible ? "Visible" : "NotVisibleOrNotAction"; }

inline RawLabel parse_raw_label(std::string_view s)
{
  if (s == "Visible") return RawLabel::Visible;
  if (s == "NotVisible") return RawLabel::NotVisible;
  if (s == "NotAnAction") return RawLabel::NotAnAction;
  fail(ErrorCode::Parse, "unknown raw label '" + std::string(s) + "'");
}

inline BinaryLabel parse_binary_label(std::string_view s)
{
  if (s == "Visible") return BinaryLabel::Visible;
  if (s == "NotVisibleOrNotAction" || s == "NotVisible" || s == "NotAnAction") return BinaryLabel::NotVisibleOrNotAction;
  fail(ErrorCode::Parse, "unknown label '" + std::string(s) + "'");
}

/// "Not visible" and "not an action" are merged before any use of a label.
inline BinaryLabel binarize(RawLabel l) { return l == RawLabel::Visible ? BinaryLabel::Visible : BinaryLabel::NotVisibleOrNotAction; }

using ItemKey = std::pair<std::string, std::string>; // (miniclip_id, action_id)

struct HitClip {
  std::string miniclip_id;
  bool ground_truth = false;
  std::vector<std::string> action_ids;

  bool operator==(const HitClip&) const = default;
};

struct Hit {
  std::string hit_id;
  std::vector<HitClip> clips;

  bool operator==(const Hit&) const = default;
  const HitClip* ground_truth_clip() const
  {
    for (const auto& c : clips)
      if (c.ground_truth) return &c;
    return nullptr;
  }
};

/// A miniclip as seen by HIT composition: id plus its actions in time order.
struct ClipActions {
  std::string miniclip_id;
  std::vector<std::string> action_ids;
};

/// Compose HITs of `per_hit - 1` regular miniclips plus one ground-truth
/// miniclip. Regular clips and the ground-truth pool are shuffled by `seed`;
/// ground-truth clips are reused round-robin and placed at a seeded position.
/// Each clip keeps at most `max_actions` actions. When the regular count is
/// not a multiple of `per_hit - 1` the last HIT carries fewer regular clips.
inline std::vector<Hit> build_hits(std::vector<ClipActions> regular, std::vector<ClipActions> gt_pool, std::uint64_t seed,
                                   std::size_t per_hit = 5, std::size_t max_actions = 7)
{
  if (per_hit < 2) fail(ErrorCode::Config, "per_hit must be at least 2");
  for (auto& g : gt_pool) {
    if (g.action_ids.size() > max_actions) g.action_ids.resize(max_actions);
    if (g.action_ids.size() <= 4)
      fail(ErrorCode::InsufficientGroundTruth, "ground-truth miniclip " + g.miniclip_id + " has 4 or fewer labeled actions");
  }
  if (gt_pool.empty()) fail(ErrorCode::InsufficientGroundTruth, "ground-truth pool is empty");

  std::set<std::string> gt_ids;
  for (const auto& g : gt_pool) gt_ids.insert(g.miniclip_id);
  std::erase_if(regular, [&](const ClipActions& c) { return c.action_ids.empty() || gt_ids.contains(c.miniclip_id); });
  for (auto& c : regular)
    if (c.action_ids.size() > max_actions) c.action_ids.resize(max_actions);

  Rng rng(seed);
  rng.shuffle(regular);
  rng.shuffle(gt_pool);

  const std::size_t slots = per_hit - 1;
  std::vector<Hit> hits;
  for (std::size_t start = 0, k = 0; start < regular.size(); start += slots, ++k) {
    Hit h;
    char name[32];
    std::snprintf(name, sizeof name, "hit_%05zu", k);
    h.hit_id = name;
    const std::size_t stop = std::min(regular.size(), start + slots);
    for (std::size_t i = start; i < stop; ++i) h.clips.push_back({regular[i].miniclip_id, false, regular[i].action_ids});
    const auto& g = gt_pool[k % gt_pool.size()];
    const auto pos = static_cast<std::ptrdiff_t>(rng.index(h.clips.size() + 1));
    h.clips.insert(h.clips.begin() + pos, HitClip{g.miniclip_id, true, g.action_ids});
    hits.push_back(std::move(h));
  }
  return hits;
}

struct LabelResponse {
  std::string miniclip_id;
  std::string action_id;
  RawLabel raw_label = RawLabel::Visible;
};

enum class SpamVerdict { Accept, RejectUniform, RejectLowAccuracy };

inline std::string_view to_string(SpamVerdict v)
{
  switch (v) {
    case SpamVerdict::Accept: return "Accept";
    case SpamVerdict::RejectUniform: return "RejectUniform";
    case SpamVerdict::RejectLowAccuracy: return "RejectLowAccuracy";
  }
  return "?";
}

/// The submission must label exactly the actions presented in the HIT.
inline void check_complete(const Hit& hit, std::span<const LabelResponse> responses)
{
  std::set<ItemKey> expected;
  for (const auto& c : hit.clips)
    for (const auto& a : c.action_ids) expected.insert({c.miniclip_id, a});
  std::set<ItemKey> seen;
  for (const auto& r : responses) {
    ItemKey key{r.miniclip_id, r.action_id};
    if (!expected.contains(key))
      fail(ErrorCode::IncompleteSubmission, "label for an action not in HIT " + hit.hit_id + ": " + r.miniclip_id + "/" + r.action_id);
    if (!seen.insert(key).second)
      fail(ErrorCode::IncompleteSubmission, "action labeled twice: " + r.miniclip_id + "/" + r.action_id);
  }
  if (seen.size() != expected.size())
    fail(ErrorCode::IncompleteSubmission,
         "HIT " + hit.hit_id + " has " + std::to_string(expected.size()) + " actions, got " + std::to_string(seen.size()) + " labels");
}

/// Reject a worker who used one label for everything, or whose binarized
/// accuracy on the ground-truth miniclip is below 20%. Exactly 20% passes.
inline SpamVerdict detect_spam(const Hit& hit, std::span<const LabelResponse> responses,
                               const std::map<ItemKey, BinaryLabel>& gt_labels)
{
  check_complete(hit, responses);
  const bool uniform = std::all_of(responses.begin(), responses.end(),
                                   [&](const LabelResponse& r) { return r.raw_label == responses.front().raw_label; });
  if (uniform) return SpamVerdict::RejectUniform;

  const HitClip* gt = hit.ground_truth_clip();
  if (!gt) fail(ErrorCode::InsufficientGroundTruth, "HIT " + hit.hit_id + " has no ground-truth miniclip");
  std::size_t total = 0, correct = 0;
  for (const auto& r : responses) {
    if (r.miniclip_id != gt->miniclip_id) continue;
    const auto it = gt_labels.find({r.miniclip_id, r.action_id});
    if (it == gt_labels.end()) continue;
    ++total;
    if (binarize(r.raw_label) == it->second) ++correct;
  }
  if (total == 0) fail(ErrorCode::InsufficientGroundTruth, "no ground-truth labels for miniclip " + gt->miniclip_id);
  // integer comparison avoids 1/5 < 0.2 rounding trouble
  if (correct * 5 < total) return SpamVerdict::RejectLowAccuracy;
  return SpamVerdict::Accept;
}

struct AnnotationRecord {
  std::string worker_id;
  std::string hit_id;
  std::string miniclip_id;
  std::string action_id;
  RawLabel raw_label = RawLabel::Visible;
  std::string submitted_at;
  bool accepted = true;
  bool ground_truth = false;
};

struct AggregatedLabel {
  std::string miniclip_id;
  std::string action_id;
  BinaryLabel label = BinaryLabel::Visible;
  int visible_votes = 0;
  int not_visible_votes = 0;

  bool operator==(const AggregatedLabel&) const = default;
};

/// Majority of three binarized votes per (miniclip, action). Output is sorted
/// by key, so it does not depend on record order.
inline std::vector<AggregatedLabel> aggregate(std::span<const AnnotationRecord> records, int raters = 3)
{
  std::map<ItemKey, std::pair<int, int>> votes;
  for (const auto& r : records) {
    auto& v = votes[{r.miniclip_id, r.action_id}];
    (binarize(r.raw_label) == BinaryLabel::Visible ? v.first : v.second)++;
  }
  std::vector<AggregatedLabel> out;
  for (const auto& [key, v] : votes) {
    if (v.first + v.second != raters)
      fail(ErrorCode::WrongAnnotatorCount, key.first + "/" + key.second + " has " + std::to_string(v.first + v.second) +
                                               " accepted annotations, expected " + std::to_string(raters));
    out.push_back({key.first, key.second, v.first > v.second ? BinaryLabel::Visible : BinaryLabel::NotVisibleOrNotAction, v.first,
                   v.second});
  }
  return out;
}

/// Fleiss' kappa for an N x k table of per-category rater counts, `n` raters per item.
inline double fleiss_kappa(const std::vector<std::vector<int>>& counts, int n)
{
  if (n < 2) fail(ErrorCode::RowSumMismatch, "need at least 2 raters per item");
  if (counts.empty()) fail(ErrorCode::RowSumMismatch, "no items");
  const std::size_t k = counts.front().size();
  if (k < 2) fail(ErrorCode::RowSumMismatch, "need at least 2 categories");
  const double big_n = static_cast<double>(counts.size());
  std::vector<double> col(k, 0.0);
  double p_bar = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& row = counts[i];
    if (row.size() != k) fail(ErrorCode::RowSumMismatch, "row " + std::to_string(i) + " has the wrong number of categories");
    long sum = 0, sq = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (row[j] < 0) fail(ErrorCode::RowSumMismatch, "negative count in row " + std::to_string(i));
      sum += row[j];
      sq += static_cast<long>(row[j]) * row[j];
      col[j] += row[j];
    }
    if (sum != n) fail(ErrorCode::RowSumMismatch, "row " + std::to_string(i) + " sums to " + std::to_string(sum) + ", expected " + std::to_string(n));
    p_bar += static_cast<double>(sq - n) / (static_cast<double>(n) * (n - 1));
  }
  p_bar /= big_n;
  double p_e = 0.0;
  for (double c : col) {
    const double p = c / (big_n * n);
    p_e += p * p;
  }
  if (p_e >= 1.0) fail(ErrorCode::DegenerateAgreement, "all ratings fall in one category; kappa is undefined");
  return (p_bar - p_e) / (1.0 - p_e);
}

/// Binary (Visible / not) count table over items that have exactly `raters`
/// records, in key order.
inline std::vector<std::vector<int>> binary_count_table(std::span<const AnnotationRecord> records, int raters = 3)
{
  std::map<ItemKey, std::vector<int>> table;
  for (const auto& r : records) {
    auto& row = table[{r.miniclip_id, r.action_id}];
    if (row.empty()) row.assign(2, 0);
    row[binarize(r.raw_label) == BinaryLabel::Visible ? 0 : 1]++;
  }
  std::vector<std::vector<int>> out;
  for (auto& [key, row] : table)
    if (row[0] + row[1] == raters) out.push_back(row);
  return out;
}

template <class T> struct ChannelSplit {
  std::vector<T> train;
  std::vector<T> validation;
  std::vector<T> test;
};

/// Partition by channel: the first `n_train` channels of `channel_order` are
/// train, the next `n_val` validation, the rest test.
template <class T, class ChannelOf>
ChannelSplit<T> split_by_channel(std::vector<T> items, ChannelOf channel_of, const std::vector<std::string>& channel_order,
                                 std::size_t n_train = 8, std::size_t n_val = 1)
{
  std::map<std::string, std::size_t, std::less<>> rank;
  for (std::size_t i = 0; i < channel_order.size(); ++i) rank.emplace(channel_order[i], i);
  ChannelSplit<T> out;
  for (auto& item : items) {
    const std::string& ch = channel_of(item);
    const auto it = rank.find(ch);
    if (it == rank.end()) fail(ErrorCode::UnknownChannel, "channel '" + ch + "' is not in the channel order");
    if (it->second < n_train) out.train.push_back(std::move(item));
    else if (it->second < n_train + n_val) out.validation.push_back(std::move(item));
    else out.test.push_back(std::move(item));
  }
  return out;
}

// ---- JSON -------------------------------------------------------------------

inline nlohmann::json to_json(const Hit& h, bool expose_ground_truth = true)
{
  nlohmann::json clips = nlohmann::json::array();
  for (const auto& c : h.clips) {
    nlohmann::json jc = {{"miniclip_id", c.miniclip_id}, {"action_ids", c.action_ids}};
    if (expose_ground_truth) jc["ground_truth"] = c.ground_truth;
    clips.push_back(std::move(jc));
  }
  return {{"hit_id", h.hit_id}, {"clips", clips}};
}

inline Hit hit_from_json(const nlohmann::json& j)
{
  Hit h;
  h.hit_id = io::field<std::string>(j, "hit_id");
  for (const auto& c : io::field<nlohmann::json>(j, "clips")) {
    h.clips.push_back({io::field<std::string>(c, "miniclip_id"), io::field_or<bool>(c, "ground_truth", false),
                       io::field<std::vector<std::string>>(c, "action_ids")});
  }
  return h;
}

inline nlohmann::json to_json(const AnnotationRecord& r)
{
  return {{"worker_id", r.worker_id},     {"hit_id", r.hit_id},
          {"miniclip_id", r.miniclip_id}, {"action_id", r.action_id},
          {"raw_label", to_string(r.raw_label)}, {"submitted_at", r.submitted_at},
          {"accepted", r.accepted},       {"ground_truth", r.ground_truth}};
}

inline AnnotationRecord record_from_json(const nlohmann::json& j)
{
  AnnotationRecord r;
  r.worker_id = io::field<std::string>(j, "worker_id");
  r.hit_id = io::field<std::string>(j, "hit_id");
  r.miniclip_id = io::field<std::string>(j, "miniclip_id");
  r.action_id = io::field<std::string>(j, "action_id");
  r.raw_label = parse_raw_label(io::field<std::string>(j, "raw_label"));
  r.submitted_at = io::field_or<std::string>(j, "submitted_at", "");
  r.accepted = io::field_or<bool>(j, "accepted", true);
  r.ground_truth = io::field_or<bool>(j, "ground_truth", false);
  return r;
}

inline nlohmann::json to_json(const AggregatedLabel& a)
{
  return {{"miniclip_id", a.miniclip_id}, {"action_id", a.action_id}, {"label", to_string(a.label)},
          {"visible_votes", a.visible_votes},      {"not_visible_votes", a.not_visible_votes}};
}

inline AggregatedLabel aggregated_from_json(const nlohmann::json& j)
{
  AggregatedLabel a;
  a.miniclip_id = io::field<std::string>(j, "miniclip_id");
  a.action_id = io::field<std::string>(j, "action_id");
  a.label = parse_binary_label(io::field<std::string>(j, "label"));
  a.visible_votes = io::field_or<int>(j, "visible_votes", 0);
  a.not_visible_votes = io::field_or<int>(j, "not_visible_votes", 0);
  return a;
}

inline std::map<ItemKey, BinaryLabel> load_label_map(const std::filesystem::path& path)
{
  std::map<ItemKey, BinaryLabel> out;
  for (const auto& row : io::read_jsonl(path)) {
    const auto a = aggregated_from_json(row);
    out[{a.miniclip_id, a.action_id}] = a.label;
  }
  return out;
}

// ---- annotation store ---------------------------------------------------------

struct SubmitOutcome {
  SpamVerdict verdict = SpamVerdict::Accept;
  std::size_t accepted_for_hit = 0;
};

struct Progress {
  std::size_t hits_total = 0;
  std::size_t hits_complete = 0;
  std::size_t annotated = 0; // accepted submissions, capped per HIT
  std::size_t required = 0;  // hits_total * annotators per HIT
  std::size_t records = 0;   // all logged label rows, accepted or not
};

/// In-memory annotation state backed by an append-only JSON-lines log.
///
/// Each HIT has its own lock over its record list; the FIFO queue and the log
/// file have separate locks, so submissions to different HITs only contend on
/// the final log append. Rejected HITs go to the back of the queue and are
/// served again until `annotators` submissions have been accepted.
class AnnotationStore {
 public:
  using Clock = std::function<std::string()>;

  AnnotationStore(std::vector<Hit> hits, std::map<ItemKey, BinaryLabel> gt_labels, std::optional<std::filesystem::path> log_path = {},
                  std::size_t annotators = 3, Clock clock = [] { return std::string(); })
      : gt_labels_(std::move(gt_labels)), log_path_(std::move(log_path)), annotators_(annotators), clock_(std::move(clock))
  {
    for (auto& h : hits) {
      auto state = std::make_unique<HitState>();
      state->hit = std::move(h);
      queue_.push_back(state->hit.hit_id);
      index_.emplace(state->hit.hit_id, std::move(state));
    }
    if (log_path_ && std::filesystem::exists(*log_path_)) replay(io::read_jsonl(*log_path_));
  }

  std::size_t annotators() const { return annotators_; }

  /// First queued HIT that still needs annotations and that `worker_id` has not done.
  std::optional<Hit> next_hit(const std::string& worker_id) const
  {
    std::lock_guard qlock(queue_mutex_);
    for (const auto& id : queue_) {
      const auto& st = *index_.at(id);
      std::lock_guard hlock(st.mutex);
      if (st.accepted_submissions >= annotators_) continue;
      if (st.workers.contains(worker_id)) continue;
      return st.hit;
    }
    return std::nullopt;
  }

  std::optional<Hit> find_hit(const std::string& hit_id) const
  {
    const auto it = index_.find(hit_id);
    if (it == index_.end()) return std::nullopt;
    return it->second->hit;
  }

  SubmitOutcome submit(const std::string& hit_id, const std::string& worker_id, std::span<const LabelResponse> labels)
  {
    const auto it = index_.find(hit_id);
    if (it == index_.end()) fail(ErrorCode::UnknownHit, "no HIT '" + hit_id + "'");
    auto& st = *it->second;
    SubmitOutcome out;
    std::vector<AnnotationRecord> rows;
    {
      std::lock_guard hlock(st.mutex);
      if (st.workers.contains(worker_id)) fail(ErrorCode::DuplicateRecord, "worker " + worker_id + " already submitted " + hit_id);
      if (st.accepted_submissions >= annotators_) fail(ErrorCode::DuplicateRecord, "HIT " + hit_id + " already has enough annotations");
      out.verdict = detect_spam(st.hit, labels, gt_labels_);
      const bool accepted = out.verdict == SpamVerdict::Accept;
      const std::string now = clock_();
      std::set<std::string> gt_clips;
      for (const auto& c : st.hit.clips)
        if (c.ground_truth) gt_clips.insert(c.miniclip_id);
      for (const auto& l : labels)
        rows.push_back({worker_id, hit_id, l.miniclip_id, l.action_id, l.raw_label, now, accepted, gt_clips.contains(l.miniclip_id)});
      append_log(rows);
      apply(st, rows, accepted);
      out.accepted_for_hit = st.accepted_submissions;
    }
    requeue(hit_id, out.verdict == SpamVerdict::Accept);
    return out;
  }

  Progress progress() const
  {
    Progress p;
    p.hits_total = index_.size();
    p.required = index_.size() * annotators_;
    for (const auto& [id, st] : index_) {
      std::lock_guard hlock(st->mutex);
      p.annotated += std::min(st->accepted_submissions, annotators_);
      if (st->accepted_submissions >= annotators_) ++p.hits_complete;
      p.records += st->records.size();
    }
    return p;
  }

  /// Snapshot of every logged record, in HIT then submission order.
  std::vector<AnnotationRecord> records() const
  {
    std::vector<AnnotationRecord> out;
    for (const auto& [id, st] : index_) {
      std::lock_guard hlock(st->mutex);
      out.insert(out.end(), st->records.begin(), st->records.end());
    }
    return out;
  }

  std::vector<AnnotationRecord> accepted_records(bool include_ground_truth = false) const
  {
    auto all = records();
    std::erase_if(all, [&](const AnnotationRecord& r) { return !r.accepted || (r.ground_truth && !include_ground_truth); });
    return all;
  }

  /// Fleiss' kappa over accepted records of regular miniclips; empty when
  /// there is nothing to score or agreement is degenerate.
  std::optional<double> agreement() const
  {
    const auto recs = accepted_records();
    const auto table = binary_count_table(recs, static_cast<int>(annotators_));
    if (table.empty()) return std::nullopt;
    try {
      return fleiss_kappa(table, static_cast<int>(annotators_));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateAgreement) return std::nullopt;
      throw;
    }
  }

 private:
  struct HitState {
    Hit hit;
    std::vector<AnnotationRecord> records;
    std::set<std::string> workers;
    std::size_t accepted_submissions = 0;
    mutable std::mutex mutex;
  };

  void apply(HitState& st, const std::vector<AnnotationRecord>& rows, bool accepted)
  {
    if (!rows.empty()) st.workers.insert(rows.front().worker_id);
    st.records.insert(st.records.end(), rows.begin(), rows.end());
    if (accepted) ++st.accepted_submissions;
  }

  void requeue(const std::string& hit_id, bool accepted)
  {
    std::lock_guard qlock(queue_mutex_);
    const auto pos = std::find(queue_.begin(), queue_.end(), hit_id);
    if (pos == queue_.end()) return;
    const auto& st = *index_.at(hit_id);
    std::size_t done;
    {
      std::lock_guard hlock(st.mutex);
      done = st.accepted_submissions;
    }
    if (done >= annotators_) {
      queue_.erase(pos);
    } else if (!accepted) {
      queue_.erase(pos);
      queue_.push_back(hit_id);
    }
  }

  void append_log(const std::vector<AnnotationRecord>& rows)
  {
    if (!log_path_) return;
    std::lock_guard lock(log_mutex_);
    if (log_path_->has_parent_path()) std::filesystem::create_directories(log_path_->parent_path());
    std::ofstream out(*log_path_, std::ios::app | std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot append to " + log_path_->string());
    for (const auto& r : rows) out << to_json(r).dump() << '\n';
    out.flush();
  }

  void replay(const std::vector<nlohmann::json>& rows)
  {
    // group consecutive rows of one (hit, worker) submission
    std::size_t i = 0;
    while (i < rows.size()) {
      const auto first = record_from_json(rows[i]);
      std::vector<AnnotationRecord> batch{first};
      std::size_t j = i + 1;
      while (j < rows.size()) {
        auto r = record_from_json(rows[j]);
        if (r.hit_id != first.hit_id || r.worker_id != first.worker_id) break;
        batch.push_back(std::move(r));
        ++j;
      }
      const auto it = index_.find(first.hit_id);
      if (it == index_.end()) fail(ErrorCode::Parse, "record log mentions unknown HIT " + first.hit_id);
      apply(*it->second, batch, first.accepted);
      requeue(first.hit_id, first.accepted);
      i = j;
    }
  }

  std::map<std::string, std::unique_ptr<HitState>> index_;
  std::deque<std::string> queue_;
  mutable std::mutex queue_mutex_;
  std::mutex log_mutex_;
  std::map<ItemKey, BinaryLabel> gt_labels_;
  std::optional<std::filesystem::path> log_path_;
  std::size_t annotators_;
  Clock clock_;
};

} // namespace vlogvis
