#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "vlogvis/action_extraction.hpp"
#include "vlogvis/rng.hpp"

using namespace vlogvis;

namespace {

Sentence tagged(const std::vector<std::pair<std::string, std::string>>& words)
{
  Sentence s;
  for (const auto& [w, t] : words) s.tokens.push_back({w, t, 0});
  return s;
}

std::vector<std::string> texts(const std::vector<ActionCandidate>& cs)
{
  std::vector<std::string> out;
  for (const auto& c : cs) out.push_back(c.text());
  return out;
}

const TagLexicon& shipped_lexicon()
{
  static const auto lex = load_tag_lexicon(std::string(VLOGVIS_DATA) + "/tag_lexicon.tsv");
  return lex;
}

const ChunkRules& shipped_rules()
{
  static const auto rules = load_chunk_rules(std::string(VLOGVIS_DATA) + "/chunk_rules.conf");
  return rules;
}

Transcript oven_transcript()
{
  return parse_transcript(io::read_file(std::string(VLOGVIS_FIXTURES) + "/oven_dehydrating.vtt"), "fig2", 300.0);
}

} // namespace

TEST(Tokenize, ContractionsAndPunctuation)
{
  const auto toks = tokenize_text("You're gonna \"cook\" it. Don't stop!");
  std::vector<std::string> words;
  for (const auto& t : toks) words.push_back(t.surface);
  EXPECT_EQ(words, (std::vector<std::string>{"You", "'re", "gonna", "cook", "it", "Do", "n't", "stop"}));
  EXPECT_TRUE(toks[4].sentence_end);
  EXPECT_TRUE(toks.back().sentence_end);
  EXPECT_FALSE(toks[0].sentence_end);
}

TEST(Tokenize, CurlyApostropheIsNormalized)
{
  const auto toks = tokenize_text("you\xE2\x80\x99re");
  ASSERT_EQ(toks.size(), 2u);
  EXPECT_EQ(toks[1].surface, "'re");
}

TEST(TagLexicon, LookupAndFallback)
{
  TagLexicon lex(std::unordered_map<std::string, std::string>{{"cook", "VB"}});
  const std::vector<std::string> words{"Cook", "zzqq"};
  const auto tags = tag_with_lexicon(std::span<const std::string>(words), lex);
  EXPECT_EQ(tags[0].pos, "VB");
  EXPECT_EQ(tags[1].pos, "NN");
}

TEST(TagLexicon, RejectsNonPennTags)
{
  EXPECT_THROW(parse_tag_lexicon("cook\tVERB\n"), Error);
}

TEST(TagLexicon, MatchesIndependentJoinOnLargeFixture)
{
  const auto& lex = shipped_lexicon();
  std::map<std::string, std::string> table;
  io::for_each_tsv_row(io::read_file(std::string(VLOGVIS_DATA) + "/tag_lexicon.tsv"),
                       [&](const std::vector<std::string>& row, std::size_t) { table.emplace(text::fold_case(text::trim(row[0])), text::trim(row[1])); });
  std::vector<std::string> vocab;
  for (const auto& [w, t] : table) vocab.push_back(w);
  Rng rng(9);
  std::vector<std::string> words;
  for (int i = 0; i < 1000; ++i) words.push_back(rng.bernoulli(0.1) ? "oov" + std::to_string(i) : vocab[rng.index(vocab.size())]);
  const auto tags = tag_with_lexicon(std::span<const std::string>(words), lex);
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto it = table.find(words[i]);
    EXPECT_EQ(tags[i].pos, it == table.end() ? "NN" : it->second) << words[i];
  }
}

TEST(Sidecar, ParsesBreaksAndChecksCounts)
{
  const auto sc = parse_pos_sidecar("i\tPRP\nleft\tVBD\n\nthen\tRB\n");
  EXPECT_EQ(sc.tokens.size(), 3u);
  EXPECT_EQ(sc.break_after, (std::set<std::size_t>{1}));
  std::vector<RawToken> raw{{"i"}, {"left"}};
  try {
    apply_sidecar(raw, sc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TagTokenMismatch);
  }
  EXPECT_THROW(parse_pos_sidecar("i\tPRONOUN\n"), Error);
}

TEST(SplitSentences, Punctuation)
{
  const auto t = parse_transcript("00:00:01.000 --> 00:00:03.000\ni did it. then i left.\n", "v", 10);
  const auto raw = tokenize_transcript(t);
  const auto tags = tag_with_lexicon(std::span<const RawToken>(raw), TagLexicon{});
  const auto ss = split_sentences(t, tags, 5.0);
  ASSERT_EQ(ss.size(), 2u);
  EXPECT_EQ(ss[0].tokens.size(), 3u);
  EXPECT_EQ(ss[1].index, 1u);
}

TEST(SplitSentences, CueGapSplitsUnpunctuatedCaptions)
{
  const auto t = parse_transcript("00:00:01.000 --> 00:00:02.000\nso we mix it\n\n"
                                  "00:00:08.000 --> 00:00:09.000\nand then bake it\n\n"
                                  "00:00:11.000 --> 00:00:12.000\nfor an hour\n",
                                  "v", 20);
  const auto raw = tokenize_transcript(t);
  const auto ss = split_sentences(t, tag_with_lexicon(std::span<const RawToken>(raw), TagLexicon{}), 5.0);
  ASSERT_EQ(ss.size(), 2u); // 6 s gap splits, 2 s gap does not
  EXPECT_EQ(ss[1].tokens.size(), 7u);
}

TEST(SplitSentences, EmptyAndMismatch)
{
  Transcript t;
  t.duration_s = 10;
  EXPECT_TRUE(split_sentences(t, {}, 5.0).empty());
  const auto t2 = parse_transcript("00:00:01.000 --> 00:00:02.000\na b\n", "v", 10);
  std::vector<TaggedToken> one{{"a", "DT", 0}};
  try {
    split_sentences(t2, one, 5.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TagTokenMismatch);
  }
}

TEST(Chunker, GonnaActuallyCookIt)
{
  const auto s = tagged({{"you", "PRP"}, {"'re", "VBP"}, {"gonna", "VBG"}, {"actually", "RB"}, {"cook", "VB"}, {"it", "PRP"}});
  EXPECT_EQ(texts(extract_candidates(s, ChunkRules{})), (std::vector<std::string>{"actually cook it"}));
}

TEST(Chunker, GoingToTakeItOut)
{
  const auto s = tagged({{"you", "PRP"}, {"'re", "VBP"}, {"going", "VBG"}, {"to", "TO"}, {"take", "VB"}, {"it", "PRP"}, {"out", "RP"}});
  EXPECT_EQ(texts(extract_candidates(s, ChunkRules{})), (std::vector<std::string>{"take it out"}));
}

TEST(Chunker, NoVerbNoCandidates)
{
  EXPECT_TRUE(extract_candidates(tagged({{"so", "RB"}, {"nice", "JJ"}, {"today", "NN"}}), ChunkRules{}).empty());
}

TEST(Chunker, MaxLenCapsChunk)
{
  const auto s = tagged({{"pull", "VB"}, {"it", "PRP"}, {"right", "RB"}, {"off", "IN"}, {"the", "DT"}, {"baking", "VBG"}, {"sheet", "NN"},
                         {"on", "IN"}, {"the", "DT"}, {"counter", "NN"}});
  const auto cs = extract_candidates(s, ChunkRules{});
  ASSERT_FALSE(cs.empty());
  EXPECT_EQ(cs[0].text(), "pull it right off the baking sheet");
  EXPECT_EQ(cs[0].span, (TokenSpan{0, 7}));
}

TEST(Chunker, SubjectPronounBeforeNextVerbIsTrimmed)
{
  const auto s = tagged({{"take", "VB"}, {"it", "PRP"}, {"out", "RP"}, {"it", "PRP"}, {"looks", "VBZ"}, {"great", "JJ"}});
  EXPECT_EQ(texts(extract_candidates(s, ChunkRules{})), (std::vector<std::string>{"take it out", "looks great"}));
  ChunkRules keep;
  keep.trim_subject_pronoun = false;
  EXPECT_EQ(extract_candidates(s, keep)[0].text(), "take it out it");
}

TEST(ChunkRules, ParsesConfigFile)
{
  const auto r = parse_chunk_rules("max_len = 5\ngap_s = 3.5\nauxiliaries = is, was\nextend_tags = RB NN\ninclude_preceding_adverb = false\n");
  EXPECT_EQ(r.max_len, 5u);
  EXPECT_DOUBLE_EQ(r.gap_s, 3.5);
  EXPECT_EQ(r.auxiliaries.size(), 2u);
  EXPECT_EQ(r.extend_tags.size(), 2u);
  EXPECT_FALSE(r.include_preceding_adverb);
  EXPECT_THROW(parse_chunk_rules("extend_tags = RB BOGUS\n"), Error);
  const auto& shipped = shipped_rules();
  EXPECT_TRUE(shipped.auxiliaries.contains("gonna"));
  EXPECT_EQ(shipped.max_len, 7u);
}

TEST(ActionTimestamp, FirstTokenCueStart)
{
  const auto t = parse_transcript("00:03:24.000 --> 00:03:27.000\nyou're gonna actually\n\n00:03:27.000 --> 00:03:29.000\ncook it\n", "v", 300);
  ActionCandidate c;
  c.tokens = {{"actually", "RB", 0}, {"cook", "VB", 1}};
  EXPECT_DOUBLE_EQ(timestamp_action(c, t), 204.0);
  c.tokens = {{"cook", "VB", 1}};
  EXPECT_DOUBLE_EQ(timestamp_action(c, t), 207.0);
  c.tokens = {{"cook", "VB", 9}};
  try {
    timestamp_action(c, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DanglingCueIndex);
  }
}

TEST(OvenTranscript, ExtractsAnnotatedActions)
{
  const auto t = oven_transcript();
  const auto raw = tokenize_transcript(t);
  const auto tags = tag_with_lexicon(std::span<const RawToken>(raw), shipped_lexicon());
  const auto r = extract_actions(t, tags, shipped_rules());
  const auto found = texts(r.candidates);
  for (const char* expected : {"actually cook it", "take it out", "bake it for about six hours", "keep in mind that",
                               "pull it right off the baking sheet", "put it on to some parchment paper"})
    EXPECT_NE(std::find(found.begin(), found.end(), expected), found.end()) << expected;
  const auto cook = std::find_if(r.candidates.begin(), r.candidates.end(), [](const auto& c) { return c.text() == "actually cook it"; });
  ASSERT_NE(cook, r.candidates.end());
  EXPECT_DOUBLE_EQ(cook->time_s, 204.0);
}

TEST(ChunkerProperties, FuzzedTagSequences)
{
  static const std::vector<std::string> pool = {"VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "RB", "RP", "DT", "PRP", "PRP$", "JJ",
                                                "NN", "NNS", "IN", "TO", "CD", "MD", "CC", "UH", "WP", "POS"};
  static const std::vector<std::string> words = {"is", "cook", "it", "the", "gonna", "have", "mix", "really", "out", "do"};
  Rng rng(2024);
  ChunkRules rules;
  for (int trial = 0; trial < 500; ++trial) {
    rules.max_len = 1 + rng.index(9);
    Sentence s;
    for (std::size_t i = 0, n = rng.index(25); i < n; ++i) s.tokens.push_back({words[rng.index(words.size())], pool[rng.index(pool.size())], 0});
    const auto cs = extract_candidates(s, rules);
    EXPECT_EQ(texts(cs), texts(extract_candidates(s, rules))); // deterministic
    std::size_t prev_end = 0;
    for (const auto& c : cs) {
      ASSERT_GT(c.span.size(), 0u);
      EXPECT_LE(c.span.size(), rules.max_len);
      EXPECT_GE(c.span.start, prev_end); // ordered, non-overlapping
      prev_end = c.span.end;
      // the head is the first verb in the span (a leading RB is allowed)
      const auto& head = c.tokens[c.tokens.front().pos == "RB" ? 1 : 0];
      EXPECT_TRUE(is_verb_tag(head.pos));
      EXPECT_FALSE(rules.auxiliaries.contains(text::fold_case(head.surface)));
      for (const auto& tok : c.tokens) EXPECT_TRUE(is_penn_tag(tok.pos));
    }
  }
}
