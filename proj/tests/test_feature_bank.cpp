#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>

#include "vlogvis/feature_bank.hpp"
#include "vlogvis/rng.hpp"

using namespace vlogvis;

namespace {

Vector vec(std::initializer_list<double> xs)
{
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

ErrorCode code_of(const std::function<void()>& fn)
{
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::Io;
}

const ConcretenessLexicon& fixture_lexicon()
{
  static const auto lex = load_concreteness(std::filesystem::path(VLOGVIS_FIXTURES) / "concreteness.tsv");
  return lex;
}

struct TaggedAction {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  double expected;
};

// The six example actions with their highest-scoring word.
const std::vector<TaggedAction> table_examples = {
    {{"cook", "things", "in", "water"}, {"VB", "NNS", "IN", "NN"}, 5.00},
    {{"head", "right", "into", "my", "kitchen"}, {"VB", "RB", "IN", "PRP$", "NN"}, 4.97},
    {{"throw", "it", "into", "the", "washer"}, {"VB", "PRP", "IN", "DT", "NN"}, 4.70},
    {{"told", "you", "what"}, {"VBD", "PRP", "WP"}, 2.31},
    {{"share", "my", "thoughts"}, {"VB", "PRP$", "NNS"}, 2.96},
    {{"prefer", "them"}, {"VB", "PRP"}, 1.62},
};

} // namespace

TEST(EmbeddingTable, ParseAndCaseFold)
{
  const auto t = parse_embedding_table("Cook 1 2\ncook 9 9\nonion 3 4\n");
  EXPECT_EQ(t.dim(), 2u);
  EXPECT_EQ(*t.find("COOK"), vec({1, 2})); // first casing wins
  EXPECT_EQ(t.find("garlic"), nullptr);
  EXPECT_EQ(code_of([] { parse_embedding_table("a 1 2\nb 1\n"); }), ErrorCode::DimMismatch);
}

TEST(Pooling, SingleWordIsItsOwnVector)
{
  EmbeddingTable t(3);
  t.insert("cut", vec({1, -2, 3}));
  const std::vector<std::string> words{"cut"};
  EXPECT_EQ(action_embedding(words, t).value, vec({1, -2, 3}));
}

TEST(Pooling, OppositeVectorsCancel)
{
  EmbeddingTable t(2);
  t.insert("a", vec({0.5, 2}));
  t.insert("b", vec({-0.5, -2}));
  const std::vector<std::string> words{"a", "b"};
  EXPECT_TRUE(mean_pool(words, t).value.isZero());
}

TEST(Pooling, AllOovIsFlaggedZero)
{
  EmbeddingTable t(2);
  const std::vector<std::string> words{"zz", "qq"};
  const auto p = mean_pool(words, t);
  EXPECT_TRUE(p.oov);
  EXPECT_TRUE(p.value.isZero());
}

TEST(Pooling, MatchesScalarOracleAndSkipsOov)
{
  Rng rng(9);
  EmbeddingTable t(5);
  std::vector<std::vector<double>> rows;
  for (int w = 0; w < 20; ++w) {
    std::vector<double> r(5);
    for (auto& x : r) x = rng.normal();
    rows.push_back(r);
    t.insert("w" + std::to_string(w), Eigen::Map<const Vector>(r.data(), 5));
  }
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> words;
    std::vector<double> sum(5, 0.0);
    std::size_t hits = 0;
    for (std::size_t i = 0, n = 1 + rng.index(8); i < n; ++i) {
      const auto k = rng.index(25);
      words.push_back("w" + std::to_string(k));
      if (k < 20) {
        for (int d = 0; d < 5; ++d) sum[d] += rows[k][d];
        ++hits;
      }
    }
    const auto p = mean_pool(words, t);
    EXPECT_EQ(p.hits, hits);
    for (int d = 0; d < 5; ++d) EXPECT_NEAR(p.value[d], hits ? sum[d] / static_cast<double>(hits) : 0.0, 1e-12);
  }
}

TEST(Pooling, PosTagsPoolLikeWords)
{
  EmbeddingTable pos(2);
  pos.insert("VB", vec({1, 0}));
  pos.insert("NN", vec({0, 1}));
  const std::vector<std::string> tags{"VB", "DT", "NN"};
  EXPECT_EQ(pos_embedding(tags, pos).value, vec({0.5, 0.5}));
}

TEST(Context, WindowsAreClippedToTheSentence)
{
  EmbeddingTable t(1);
  std::vector<std::string> sentence;
  for (int i = 0; i < 12; ++i) {
    sentence.push_back("t" + std::to_string(i));
    t.insert(sentence.back(), vec({static_cast<double>(i)}));
  }
  // 3 tokens before the action [3, 4), 8 after it: windows are 3 and 5 wide
  const auto c = context_features(sentence, 3, 4, nullptr, nullptr, t);
  EXPECT_DOUBLE_EQ(c.sentence_before[0], (0 + 1 + 2) / 3.0);
  EXPECT_DOUBLE_EQ(c.sentence_after[0], (4 + 5 + 6 + 7 + 8) / 5.0);
  EXPECT_TRUE(c.action_prev.isZero());
  const std::vector<std::string> prev{"t11"};
  EXPECT_DOUBLE_EQ(context_features(sentence, 0, 12, &prev, nullptr, t).action_prev[0], 11.0);
  EXPECT_TRUE(context_features(sentence, 0, 12, &prev, nullptr, t).sentence_after.isZero());
  EXPECT_EQ(code_of([&] { context_features(sentence, 5, 13, nullptr, nullptr, t); }), ErrorCode::DimMismatch);
}

TEST(Concreteness, SixExampleActionsExact)
{
  for (const auto& ex : table_examples) {
    const auto s = concreteness_score(ex.tokens, ex.tags, fixture_lexicon());
    ASSERT_TRUE(s.has_value()) << ex.tokens[0];
    EXPECT_DOUBLE_EQ(*s, ex.expected) << ex.tokens[0];
  }
}

TEST(Concreteness, LemmaCandidates)
{
  EXPECT_EQ(lemma_candidates("told").front(), "tell");
  EXPECT_EQ(lemma_candidates("things").front(), "thing");
  const auto chopped = lemma_candidates("chopped");
  EXPECT_NE(std::find(chopped.begin(), chopped.end(), "chop"), chopped.end());
  const auto baking = lemma_candidates("baking");
  EXPECT_NE(std::find(baking.begin(), baking.end(), "bake"), baking.end());
  EXPECT_EQ(lemma_candidates("berries").front(), "berry");
}

TEST(Concreteness, PronounOnlyHasNoScore)
{
  const std::vector<std::string> toks{"it", "them"}, tags{"PRP", "PRP"};
  EXPECT_FALSE(concreteness_score(toks, tags, fixture_lexicon()).has_value());
}

TEST(Concreteness, OrderInvariantMaxOverVerbsAndNouns)
{
  Rng rng(21);
  for (const auto& ex : table_examples) {
    std::vector<std::size_t> perm = iota_indices(ex.tokens.size());
    for (int t = 0; t < 10; ++t) {
      rng.shuffle(perm);
      std::vector<std::string> toks, tags;
      for (auto i : perm) {
        toks.push_back(ex.tokens[i]);
        tags.push_back(ex.tags[i]);
      }
      EXPECT_DOUBLE_EQ(*concreteness_score(toks, tags, fixture_lexicon()), ex.expected);
    }
  }
  // a non-verb, non-noun word is ignored even when it is in the lexicon
  const std::vector<std::string> toks{"right"}, tags{"RB"};
  EXPECT_FALSE(concreteness_score(toks, tags, fixture_lexicon()).has_value());
}

TEST(Concreteness, LexiconValidation)
{
  ConcretenessLexicon lex;
  EXPECT_EQ(code_of([&] { lex.insert("x", 5.5); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { parse_concreteness("Word\tConc.M\nwater\tfive\n"); }), ErrorCode::Parse);
  const std::vector<std::string> a{"x"}, b{};
  EXPECT_EQ(code_of([&] { concreteness_score(a, b, lex); }), ErrorCode::LengthMismatch);
}

TEST(Taxonomy, WupValues)
{
  const auto tax = load_taxonomy(std::filesystem::path(VLOGVIS_FIXTURES) / "taxonomy.tsv");
  EXPECT_EQ(tax.root(), "entity");
  EXPECT_EQ(tax.depth("bread"), 3u);
  EXPECT_EQ(tax.lcs("bread", "cheese"), "food");
  EXPECT_DOUBLE_EQ(wup_similarity(tax, "bread", "bread"), 1.0);
  EXPECT_DOUBLE_EQ(wup_similarity(tax, "bread", "cheese"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(wup_similarity(tax, "entity", "bread"), 0.5);
  EXPECT_DOUBLE_EQ(wup_similarity(tax, "cheese", "bread"), wup_similarity(tax, "bread", "cheese"));
  EXPECT_EQ(code_of([&] { tax.depth("laptop"); }), ErrorCode::UnknownLabel);
}

TEST(Taxonomy, RandomTreesSymmetricBoundedAndReflexive)
{
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::pair<std::string, std::string>> edges{{"n0", "n0"}};
    const std::size_t n = 2 + rng.index(30);
    for (std::size_t i = 1; i < n; ++i) edges.emplace_back("n" + std::to_string(i), "n" + std::to_string(rng.index(i)));
    rng.shuffle(edges);
    const Taxonomy tax(edges);
    for (int q = 0; q < 30; ++q) {
      const auto a = "n" + std::to_string(rng.index(n)), b = "n" + std::to_string(rng.index(n));
      const double s = wup_similarity(tax, a, b);
      EXPECT_DOUBLE_EQ(s, wup_similarity(tax, b, a));
      EXPECT_GT(s, 0.0);
      EXPECT_LE(s, 1.0);
      EXPECT_DOUBLE_EQ(wup_similarity(tax, a, a), 1.0);
    }
  }
}

TEST(Taxonomy, ParseErrors)
{
  EXPECT_EQ(code_of([] { parse_taxonomy("a\tb\nb\tc\n"); }), ErrorCode::Parse); // no root
  EXPECT_EQ(code_of([] { parse_taxonomy("a\ta\nb\tmissing\n"); }), ErrorCode::Parse);
}

TEST(Cosine, ValuesAndScaleInvariance)
{
  EXPECT_NEAR(cosine(vec({1, 0}), vec({1, 1})), 0.70711, 1e-5);
  EXPECT_DOUBLE_EQ(cosine(vec({1, 2}), vec({-1, -2})), -1.0);
  EXPECT_EQ(code_of([] { cosine(vec({0, 0}), vec({1, 1})); }), ErrorCode::ZeroVector);
  EXPECT_EQ(code_of([] { cosine(vec({1}), vec({1, 1})); }), ErrorCode::DimMismatch);
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    Vector u(4), v(4);
    for (int d = 0; d < 4; ++d) {
      u[d] = rng.normal();
      v[d] = rng.normal();
    }
    const double k = rng.uniform(0.1, 10);
    EXPECT_NEAR(cosine(u, v), cosine(k * u, v), 1e-12);
    EXPECT_NEAR(cosine(u, v), u.dot(v) / std::sqrt(u.dot(u) * v.dot(v)), 1e-12);
  }
}

TEST(Vfb1, RoundTripIncludingEmpty)
{
  Rng rng(4);
  for (std::uint32_t rows : {0u, 1u, 7u}) {
    FeatureRows f{3, 2, {}};
    for (std::uint32_t i = 0; i < rows * 5; ++i) f.values.push_back(static_cast<float>(rng.normal()));
    const auto bytes = encode_vfb1(f);
    EXPECT_EQ(bytes.size(), 16u + rows * 5 * 4);
    EXPECT_EQ(decode_vfb1(bytes), f);
  }
}

TEST(Vfb1, CorruptFiles)
{
  FeatureRows f{2, 1, {1, 2, 3, 4, 5, 6}};
  const auto bytes = encode_vfb1(f);
  EXPECT_EQ(code_of([&] { decode_vfb1("VFB2" + bytes.substr(4)); }), ErrorCode::BadMagic);
  EXPECT_EQ(code_of([&] { decode_vfb1(bytes.substr(0, bytes.size() - 1)); }), ErrorCode::TruncatedFile);
  EXPECT_EQ(code_of([&] { decode_vfb1(bytes.substr(0, 10)); }), ErrorCode::TruncatedFile);
  EXPECT_EQ(code_of([&] { decode_vfb1(bytes + "xxxx"); }), ErrorCode::DimMismatch);
  FeatureRows ragged{2, 1, {1, 2}};
  EXPECT_EQ(code_of([&] { encode_vfb1(ragged); }), ErrorCode::DimMismatch);
}

TEST(VideoFeatureBank, LoadsFromDirectoryAndChecksDims)
{
  const auto dir = std::filesystem::temp_directory_path() / ("vlogvis_bank_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  save_feature_bank(dir / "a_0.vfb", FeatureRows{2, 1, {1, 2, 3}});
  save_feature_bank(dir / "b_0.vfb", FeatureRows{4, 1, {1, 2, 3, 4, 5}});
  VideoFeatureBank bank(dir);
  ASSERT_NE(bank.find("a_0"), nullptr);
  EXPECT_EQ(bank.find("a_0")->rows(), 1u);
  EXPECT_EQ(bank.find("missing"), nullptr);
  EXPECT_EQ(bank.dims(), (std::pair<std::uint32_t, std::uint32_t>{2, 1}));
  EXPECT_EQ(code_of([&] { bank.find("b_0"); }), ErrorCode::DimMismatch);
  std::filesystem::remove_all(dir);
}

TEST(VectorJson, RoundTrip)
{
  const Vector v = vec({0.1, -2.5, 3e-9});
  EXPECT_EQ(vector_from_json(vector_to_json(v)), v);
}
