#include <gtest/gtest.h>

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include "oracles.hpp"
#include "vlogvis/annotation.hpp"
#include "vlogvis/io.hpp"
#include "vlogvis/rng.hpp"

using namespace vlogvis;

namespace {

ClipActions clip(const std::string& id, std::size_t n_actions)
{
  ClipActions c{id, {}};
  for (std::size_t i = 0; i < n_actions; ++i) c.action_ids.push_back(id + "_a" + std::to_string(i));
  return c;
}

std::vector<ClipActions> regulars(std::size_t n, std::size_t actions = 3)
{
  std::vector<ClipActions> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(clip("r" + std::to_string(i), actions));
  return out;
}

/// Answer every action of `hit`: ground-truth actions via `gt_answer`, the rest via `other`.
std::vector<LabelResponse> answer(const Hit& hit, RawLabel gt_answer, RawLabel other)
{
  std::vector<LabelResponse> out;
  for (const auto& c : hit.clips)
    for (const auto& a : c.action_ids) out.push_back({c.miniclip_id, a, c.ground_truth ? gt_answer : other});
  return out;
}

std::map<ItemKey, BinaryLabel> gt_all(const ClipActions& g, BinaryLabel label)
{
  std::map<ItemKey, BinaryLabel> out;
  for (const auto& a : g.action_ids) out[{g.miniclip_id, a}] = label;
  return out;
}

const std::vector<std::vector<int>> worked_example = {{0, 0, 0, 0, 14}, {0, 2, 6, 4, 2}, {0, 0, 3, 5, 6}, {0, 3, 9, 2, 0}, {2, 2, 8, 1, 1},
                                                      {7, 7, 0, 0, 0},  {3, 2, 6, 3, 0}, {2, 5, 3, 2, 2}, {6, 5, 2, 1, 0}, {0, 2, 2, 3, 7}};

AnnotationRecord rec(const std::string& worker, const std::string& clip_id, const std::string& action, RawLabel l)
{
  return {worker, "h", clip_id, action, l, "", true, false};
}

} // namespace

TEST(Labels, ParseAndBinarize)
{
  EXPECT_EQ(parse_raw_label("NotAnAction"), RawLabel::NotAnAction);
  EXPECT_EQ(binarize(RawLabel::NotVisible), BinaryLabel::NotVisibleOrNotAction);
  EXPECT_EQ(binarize(RawLabel::NotAnAction), BinaryLabel::NotVisibleOrNotAction);
  EXPECT_EQ(binarize(RawLabel::Visible), BinaryLabel::Visible);
  EXPECT_EQ(parse_binary_label("NotVisibleOrNotAction"), BinaryLabel::NotVisibleOrNotAction);
  EXPECT_THROW(parse_raw_label("visible"), Error);
}

TEST(BuildHits, EightRegularTwoGroundTruth)
{
  const auto hits = build_hits(regulars(8), {clip("g0", 6), clip("g1", 5)}, 42);
  ASSERT_EQ(hits.size(), 2u);
  for (const auto& h : hits) {
    ASSERT_EQ(h.clips.size(), 5u);
    int gt = 0;
    for (const auto& c : h.clips) gt += c.ground_truth;
    EXPECT_EQ(gt, 1);
    EXPECT_GT(h.ground_truth_clip()->action_ids.size(), 4u);
  }
}

TEST(BuildHits, TruncatesToSevenActionsAndDropsEmptyClips)
{
  auto reg = regulars(4, 10);
  reg.push_back(clip("empty", 0));
  const auto hits = build_hits(reg, {clip("g", 9)}, 1);
  ASSERT_EQ(hits.size(), 1u);
  for (const auto& c : hits[0].clips) {
    EXPECT_LE(c.action_ids.size(), 7u);
    EXPECT_NE(c.miniclip_id, "empty");
  }
  // first seven, in order
  for (const auto& c : hits[0].clips)
    if (c.miniclip_id == "r0") { EXPECT_EQ(c.action_ids.back(), "r0_a6"); }
}

TEST(BuildHits, GroundTruthRequirements)
{
  try {
    build_hits(regulars(4), {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientGroundTruth);
  }
  try {
    build_hits(regulars(4), {clip("g", 4)}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientGroundTruth);
  }
}

TEST(BuildHits, DeterministicUnderSeedAndLastHitMayBeShort)
{
  const auto a = build_hits(regulars(10), {clip("g0", 5), clip("g1", 5)}, 7);
  const auto b = build_hits(regulars(10), {clip("g0", 5), clip("g1", 5)}, 7);
  const auto c = build_hits(regulars(10), {clip("g0", 5), clip("g1", 5)}, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a.back().clips.size(), 3u); // 2 regular + gt
  std::set<std::string> regular_seen;
  for (const auto& h : a)
    for (const auto& cl : h.clips)
      if (!cl.ground_truth) { EXPECT_TRUE(regular_seen.insert(cl.miniclip_id).second); }
  EXPECT_EQ(regular_seen.size(), 10u);
}

TEST(Spam, UniformAnswersRejected)
{
  const auto g = clip("g", 6);
  const auto hits = build_hits(regulars(4, 6), {g}, 3);
  const auto responses = answer(hits[0], RawLabel::Visible, RawLabel::Visible);
  EXPECT_EQ(responses.size(), 30u);
  EXPECT_EQ(detect_spam(hits[0], responses, gt_all(g, BinaryLabel::Visible)), SpamVerdict::RejectUniform);
}

TEST(Spam, AccuracyBoundary)
{
  const auto g = clip("g", 5);
  const auto hits = build_hits(regulars(4), {g}, 3);
  const auto gt = gt_all(g, BinaryLabel::Visible);
  // 0 of 5 correct
  EXPECT_EQ(detect_spam(hits[0], answer(hits[0], RawLabel::NotVisible, RawLabel::Visible), gt), SpamVerdict::RejectLowAccuracy);
  // exactly 1 of 5 = 0.2 is accepted
  auto r = answer(hits[0], RawLabel::NotAnAction, RawLabel::Visible);
  for (auto& l : r)
    if (l.miniclip_id == "g" && l.action_id == "g_a0") l.raw_label = RawLabel::Visible;
  EXPECT_EQ(detect_spam(hits[0], r, gt), SpamVerdict::Accept);
}

TEST(Spam, BinarizedComparison)
{
  const auto g = clip("g", 5);
  const auto hits = build_hits(regulars(4), {g}, 3);
  // NotAnAction counts as correct against a NotVisibleOrNotAction ground truth
  EXPECT_EQ(detect_spam(hits[0], answer(hits[0], RawLabel::NotAnAction, RawLabel::Visible), gt_all(g, BinaryLabel::NotVisibleOrNotAction)),
            SpamVerdict::Accept);
}

TEST(Spam, IncompleteSubmission)
{
  const auto g = clip("g", 5);
  const auto hits = build_hits(regulars(4), {g}, 3);
  auto r = answer(hits[0], RawLabel::Visible, RawLabel::NotVisible);
  r.pop_back();
  try {
    detect_spam(hits[0], r, gt_all(g, BinaryLabel::Visible));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompleteSubmission);
  }
  r = answer(hits[0], RawLabel::Visible, RawLabel::NotVisible);
  r.push_back(r.front());
  EXPECT_THROW(detect_spam(hits[0], r, gt_all(g, BinaryLabel::Visible)), Error);
}

TEST(Spam, UniformIsMonotoneInSupersets)
{
  const auto g = clip("g", 5);
  const auto gt = gt_all(g, BinaryLabel::Visible);
  for (std::size_t n = 1; n <= 6; ++n) {
    const auto hits = build_hits(regulars(4, n), {g}, n);
    EXPECT_EQ(detect_spam(hits[0], answer(hits[0], RawLabel::NotVisible, RawLabel::NotVisible), gt), SpamVerdict::RejectUniform);
  }
}

TEST(Aggregate, MajorityVotes)
{
  std::vector<AnnotationRecord> rs{rec("w1", "m", "a", RawLabel::Visible), rec("w2", "m", "a", RawLabel::Visible), rec("w3", "m", "a", RawLabel::NotVisible),
                                   rec("w1", "m", "b", RawLabel::NotVisible), rec("w2", "m", "b", RawLabel::NotAnAction), rec("w3", "m", "b", RawLabel::NotVisible)};
  const auto out = aggregate(rs);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].label, BinaryLabel::Visible);
  EXPECT_EQ(out[0].visible_votes, 2);
  EXPECT_EQ(out[1].label, BinaryLabel::NotVisibleOrNotAction);
  EXPECT_EQ(out[1].not_visible_votes, 3);
}

TEST(Aggregate, CleansedBeforeYouExample)
{
  // worker votes (visible, not visible, visible) against a visible ground truth
  std::vector<AnnotationRecord> rs{rec("w1", "m", "cleansed before you", RawLabel::Visible),
                                   rec("w2", "m", "cleansed before you", RawLabel::NotVisible),
                                   rec("w3", "m", "cleansed before you", RawLabel::Visible)};
  EXPECT_EQ(aggregate(rs)[0].label, BinaryLabel::Visible);
}

TEST(Aggregate, WrongAnnotatorCount)
{
  std::vector<AnnotationRecord> rs{rec("w1", "m", "a", RawLabel::Visible), rec("w2", "m", "a", RawLabel::Visible)};
  try {
    aggregate(rs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WrongAnnotatorCount);
  }
}

TEST(Aggregate, InvariantToRecordOrder)
{
  Rng rng(8);
  std::vector<AnnotationRecord> rs;
  for (int item = 0; item < 30; ++item)
    for (int w = 0; w < 3; ++w)
      rs.push_back(rec("w" + std::to_string(w), "m" + std::to_string(item % 4), "a" + std::to_string(item), static_cast<RawLabel>(rng.index(3))));
  const auto base = aggregate(rs);
  for (int t = 0; t < 20; ++t) {
    rng.shuffle(rs);
    EXPECT_EQ(aggregate(rs), base);
  }
  for (const auto& a : base) EXPECT_EQ(a.visible_votes + a.not_visible_votes, 3);
}

TEST(Kappa, PerfectAgreement)
{
  EXPECT_DOUBLE_EQ(fleiss_kappa({{3, 0}, {0, 3}, {3, 0}}, 3), 1.0);
}

TEST(Kappa, WorkedExample)
{
  const double k = fleiss_kappa(worked_example, 14);
  EXPECT_NEAR(k, 0.210, 1e-3);
  EXPECT_NEAR(k, oracle::fleiss(worked_example, 14), 1e-12);
}

TEST(Kappa, Errors)
{
  auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code([] { fleiss_kappa({{2, 0}, {1, 0}}, 2); }), ErrorCode::RowSumMismatch);
  EXPECT_EQ(code([] { fleiss_kappa({{3, 0}, {3, 0}}, 3); }), ErrorCode::DegenerateAgreement);
  EXPECT_EQ(code([] { fleiss_kappa({{1}}, 1); }), ErrorCode::RowSumMismatch);
}

TEST(Kappa, InvariantUnderColumnPermutationAndMatchesOracle)
{
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(8));
    const std::size_t k = 2 + rng.index(4);
    std::vector<std::vector<int>> t(1 + rng.index(20), std::vector<int>(k, 0));
    for (auto& row : t)
      for (int r = 0; r < n; ++r) row[rng.index(k)]++;
    t[0].assign(k, 0);
    t[0][0] = n; // guarantees at least two categories are used
    t.push_back(std::vector<int>(k, 0));
    t.back()[1] = n;
    std::vector<std::size_t> perm = iota_indices(k);
    rng.shuffle(perm);
    auto permuted = t;
    for (std::size_t i = 0; i < t.size(); ++i)
      for (std::size_t j = 0; j < k; ++j) permuted[i][j] = t[i][perm[j]];
    const double a = fleiss_kappa(t, n);
    EXPECT_NEAR(a, fleiss_kappa(permuted, n), 1e-12);
    EXPECT_NEAR(a, oracle::fleiss(t, n), 1e-12);
  }
}

TEST(ChannelSplit, EightOneOne)
{
  std::vector<std::string> order;
  for (int c = 0; c < 10; ++c) order.push_back("c" + std::to_string(c));
  std::vector<std::string> items = order;
  const auto s = split_by_channel(items, [](const std::string& x) -> const std::string& { return x; }, order);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.validation, (std::vector<std::string>{"c8"}));
  EXPECT_EQ(s.test, (std::vector<std::string>{"c9"}));
}

TEST(ChannelSplit, EmptyValidationChannelAndUnknown)
{
  std::vector<std::string> order;
  for (int c = 0; c < 10; ++c) order.push_back("c" + std::to_string(c));
  std::vector<std::string> items{"c0", "c9", "c9"};
  const auto s = split_by_channel(items, [](const std::string& x) -> const std::string& { return x; }, order);
  EXPECT_TRUE(s.validation.empty());
  EXPECT_EQ(s.test.size(), 2u);
  std::vector<std::string> bad{"zz"};
  try {
    split_by_channel(bad, [](const std::string& x) -> const std::string& { return x; }, order);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownChannel);
  }
}

TEST(Json, HitRecordAndLabelRoundTrips)
{
  const auto hits = build_hits(regulars(4), {clip("g", 5)}, 1);
  EXPECT_EQ(hit_from_json(to_json(hits[0])), hits[0]);
  const auto hidden = to_json(hits[0], false).dump();
  EXPECT_EQ(hidden.find("ground_truth"), std::string::npos);

  AnnotationRecord r{"w", "h", "m", "a", RawLabel::NotAnAction, "2024-01-01T00:00:00Z", false, true};
  const auto back = record_from_json(to_json(r));
  EXPECT_EQ(back.raw_label, RawLabel::NotAnAction);
  EXPECT_FALSE(back.accepted);
  EXPECT_TRUE(back.ground_truth);

  AggregatedLabel a{"m", "a", BinaryLabel::Visible, 2, 1};
  EXPECT_EQ(aggregated_from_json(to_json(a)), a);
}

class StoreTest : public ::testing::Test {
 protected:
  void SetUp() override
  {
    g = clip("g", 5);
    hits = build_hits(regulars(8), {g}, 5);
    gt = gt_all(g, BinaryLabel::Visible);
    log = std::filesystem::temp_directory_path() / ("vlogvis_store_" + std::to_string(::getpid()) + ".jsonl");
    std::filesystem::remove(log);
  }
  void TearDown() override { std::filesystem::remove(log); }

  ClipActions g;
  std::vector<Hit> hits;
  std::map<ItemKey, BinaryLabel> gt;
  std::filesystem::path log;
};

TEST_F(StoreTest, FreshStoreHasNoAgreement)
{
  AnnotationStore store(hits, gt);
  EXPECT_EQ(store.progress().annotated, 0u);
  EXPECT_EQ(store.progress().required, 6u);
  EXPECT_FALSE(store.agreement().has_value());
}

TEST_F(StoreTest, RejectedHitsAreRequeuedUntilThreeAccepted)
{
  AnnotationStore store(hits, gt, log);
  const auto first = store.next_hit("spammer");
  ASSERT_TRUE(first);
  EXPECT_EQ(store.submit(first->hit_id, "spammer", answer(*first, RawLabel::Visible, RawLabel::Visible)).verdict, SpamVerdict::RejectUniform);
  // the rejected HIT moves to the back of the queue
  EXPECT_NE(store.next_hit("someone")->hit_id, first->hit_id);
  // and the spammer never sees it again
  for (int w = 0; w < 3; ++w) {
    const auto worker = "w" + std::to_string(w);
    EXPECT_EQ(store.submit(first->hit_id, worker, answer(*first, RawLabel::Visible, RawLabel::NotVisible)).verdict, SpamVerdict::Accept);
  }
  EXPECT_THROW(store.submit(first->hit_id, "w9", answer(*first, RawLabel::Visible, RawLabel::NotVisible)), Error);
  EXPECT_THROW(store.submit(first->hit_id, "w0", answer(*first, RawLabel::Visible, RawLabel::NotVisible)), Error);
  const auto p = store.progress();
  EXPECT_EQ(p.hits_complete, 1u);
  EXPECT_EQ(p.annotated, 3u);
  // accepted regular records aggregate cleanly; ground-truth rows are excluded by default
  const auto agg = aggregate(store.accepted_records());
  for (const auto& a : agg) EXPECT_NE(a.miniclip_id, "g");
  EXPECT_FALSE(agg.empty());
}

TEST_F(StoreTest, LogReplayRestoresState)
{
  {
    AnnotationStore store(hits, gt, log, 3, [] { return std::string("T"); });
    const auto h = store.next_hit("a");
    store.submit(h->hit_id, "a", answer(*h, RawLabel::Visible, RawLabel::NotVisible));
    store.submit(h->hit_id, "b", answer(*h, RawLabel::Visible, RawLabel::Visible));
  }
  AnnotationStore again(hits, gt, log);
  const auto p = again.progress();
  EXPECT_EQ(p.annotated, 1u);
  EXPECT_GT(p.records, 0u);
  EXPECT_EQ(again.records().front().submitted_at, "T");
}

TEST_F(StoreTest, PerfectAgreementKappaIsOne)
{
  AnnotationStore store(hits, gt);
  for (const auto& h : hits) {
    for (int w = 0; w < 3; ++w) {
      std::vector<LabelResponse> r;
      for (const auto& c : h.clips)
        for (std::size_t i = 0; i < c.action_ids.size(); ++i)
          r.push_back({c.miniclip_id, c.action_ids[i], c.ground_truth || i % 2 == 0 ? RawLabel::Visible : RawLabel::NotVisible});
      EXPECT_EQ(store.submit(h.hit_id, "w" + std::to_string(w), r).verdict, SpamVerdict::Accept);
    }
  }
  ASSERT_TRUE(store.agreement().has_value());
  EXPECT_DOUBLE_EQ(*store.agreement(), 1.0);
  EXPECT_FALSE(store.next_hit("new").has_value());
}

TEST_F(StoreTest, ConcurrentSubmissionsStayConsistent)
{
  AnnotationStore store(hits, gt, log);
  std::vector<std::thread> threads;
  std::atomic<int> accepted{0};
  for (int w = 0; w < 8; ++w) {
    threads.emplace_back([&, w] {
      const auto worker = "w" + std::to_string(w);
      while (auto h = store.next_hit(worker)) {
        try {
          if (store.submit(h->hit_id, worker, answer(*h, RawLabel::Visible, RawLabel::NotVisible)).verdict == SpamVerdict::Accept) ++accepted;
        } catch (const Error& e) {
          ASSERT_EQ(e.code(), ErrorCode::DuplicateRecord); // lost a race for the last slot
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(accepted.load(), 6);
  EXPECT_EQ(store.progress().hits_complete, 2u);
  EXPECT_EQ(io::read_jsonl(log).size(), store.records().size());
}
