#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "error.hpp"
#include "io.hpp"
#include "text.hpp"

namespace vlogvis {

using Vector = Eigen::VectorXd;

// ---- embedding tables ----------------------------------------------------------

/// word -> dense vector, case-folded lookup.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }

  /// First insertion of a (case-folded) word wins, matching how embedding
  /// files list the most frequent casing first.
  void insert(std::string_view word, Vector v)
  {
    if (static_cast<std::size_t>(v.size()) != dim_)
      fail(ErrorCode::DimMismatch, "vector for '" + std::string(word) + "' has dim " + std::to_string(v.size()) + ", table dim " +
                                       std::to_string(dim_));
    entries_.try_emplace(text::fold_case(word), std::move(v));
  }

  const Vector* find(std::string_view word) const
  {
    const auto it = entries_.find(text::fold_case(word));
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::vector<std::string> words() const
  {
    std::vector<std::string> out;
    for (const auto& [w, v] : entries_) out.push_back(w);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Vector> entries_;
};

/// Text format: `word v1 v2 ... vD` per line. The first row fixes D.
inline EmbeddingTable parse_embedding_table(std::string_view contents)
{
  EmbeddingTable table;
  bool have_dim = false;
  std::size_t line_no = 0;
  for (const auto& line : text::split(contents, '\n')) {
    ++line_no;
    const auto fields = text::split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) fail(ErrorCode::Parse, "embedding line " + std::to_string(line_no) + ": no vector");
    if (!have_dim) {
      table = EmbeddingTable(fields.size() - 1);
      have_dim = true;
    }
    if (fields.size() - 1 != table.dim())
      fail(ErrorCode::DimMismatch, "embedding line " + std::to_string(line_no) + ": expected " + std::to_string(table.dim()) + " values");
    Vector v(static_cast<Eigen::Index>(table.dim()));
    for (std::size_t i = 1; i < fields.size(); ++i) {
      try {
        v[static_cast<Eigen::Index>(i - 1)] = std::stod(fields[i]);
      } catch (const std::logic_error&) {
        fail(ErrorCode::Parse, "embedding line " + std::to_string(line_no) + ": bad number '" + fields[i] + "'");
      }
    }
    table.insert(fields[0], std::move(v));
  }
  return table;
}

inline EmbeddingTable load_embedding_table(const std::filesystem::path& path) { return parse_embedding_table(io::read_file(path)); }

/// Mean of the in-vocabulary rows; all-OOV gives a zero vector with `oov` set.
struct PooledVector {
  Vector value;
  bool oov = false;
  std::size_t hits = 0;
};

inline PooledVector mean_pool(std::span<const std::string> words, const EmbeddingTable& table)
{
  PooledVector out{Vector::Zero(static_cast<Eigen::Index>(table.dim())), false, 0};
  for (const auto& w : words) {
    if (const auto* v = table.find(w)) {
      out.value += *v;
      ++out.hits;
    }
  }
  if (out.hits == 0) out.oov = true;
  else out.value /= static_cast<double>(out.hits);
  return out;
}

inline PooledVector action_embedding(std::span<const std::string> action_tokens, const EmbeddingTable& table)
{
  return mean_pool(action_tokens, table);
}

/// Same pooling over POS tags; tags missing from the table are left out.
inline PooledVector pos_embedding(std::span<const std::string> action_tags, const EmbeddingTable& pos_table)
{
  return mean_pool(action_tags, pos_table);
}

struct ContextFeatures {
  Vector sentence_before;
  Vector sentence_after;
  Vector action_prev;
  Vector action_next;
};

/// Sentence context is the mean over at most `window` same-sentence tokens on
/// each side of the action span; action context is the pooled embedding of
/// the neighbouring actions (zero vector when there is none).
inline ContextFeatures context_features(std::span<const std::string> sentence, std::size_t span_start, std::size_t span_end,
                                        const std::vector<std::string>* prev_action, const std::vector<std::string>* next_action,
                                        const EmbeddingTable& table, std::size_t window = 5)
{
  if (span_start > span_end || span_end > sentence.size()) fail(ErrorCode::DimMismatch, "action span outside its sentence");
  const std::size_t b0 = span_start > window ? span_start - window : 0;
  const std::size_t a1 = std::min(sentence.size(), span_end + window);
  ContextFeatures out;
  out.sentence_before = mean_pool(sentence.subspan(b0, span_start - b0), table).value;
  out.sentence_after = mean_pool(sentence.subspan(span_end, a1 - span_end), table).value;
  const Vector zero = Vector::Zero(static_cast<Eigen::Index>(table.dim()));
  out.action_prev = prev_action ? mean_pool(*prev_action, table).value : zero;
  out.action_next = next_action ? mean_pool(*next_action, table).value : zero;
  return out;
}

// ---- concreteness -----------------------------------------------------------------

class ConcretenessLexicon {
 public:
  void insert(std::string_view word, double score)
  {
    if (!(score >= 1.0 && score <= 5.0))
      fail(ErrorCode::Parse, "concreteness for '" + std::string(word) + "' outside [1, 5]: " + std::to_string(score));
    entries_[text::fold_case(word)] = score;
  }

  std::optional<double> find(std::string_view word) const
  {
    const auto it = entries_.find(text::fold_case(word));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, double> entries_;
};

/// TSV `word<TAB>score`. A first row whose score is not numeric is taken as a
/// header and skipped.
inline ConcretenessLexicon parse_concreteness(std::string_view contents)
{
  ConcretenessLexicon lex;
  bool first = true;
  io::for_each_tsv_row(contents, [&](const std::vector<std::string>& row, std::size_t line) {
    const bool was_first = first;
    first = false;
    if (row.size() < 2) fail(ErrorCode::Parse, "concreteness line " + std::to_string(line) + ": expected word<TAB>score");
    double score;
    try {
      std::size_t used = 0;
      score = std::stod(row[1], &used);
      if (used != text::trim(row[1]).size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      if (was_first) return;
      fail(ErrorCode::Parse, "concreteness line " + std::to_string(line) + ": bad score '" + row[1] + "'");
    }
    lex.insert(text::trim(row[0]), score);
  });
  return lex;
}

inline ConcretenessLexicon load_concreteness(const std::filesystem::path& path) { return parse_concreteness(io::read_file(path)); }

inline const std::unordered_map<std::string, std::string>& irregular_lemmas()
{
  static const std::unordered_map<std::string, std::string> table = {
      {"am", "be"},        {"is", "be"},         {"are", "be"},       {"was", "be"},       {"were", "be"},     {"been", "be"},
      {"has", "have"},     {"had", "have"},      {"did", "do"},       {"done", "do"},      {"does", "do"},     {"went", "go"},
      {"gone", "go"},      {"goes", "go"},       {"made", "make"},    {"told", "tell"},    {"said", "say"},    {"took", "take"},
      {"taken", "take"},   {"got", "get"},       {"gotten", "get"},   {"came", "come"},    {"saw", "see"},     {"seen", "see"},
      {"ate", "eat"},      {"eaten", "eat"},     {"put", "put"},      {"cut", "cut"},      {"set", "set"},     {"let", "let"},
      {"ran", "run"},      {"gave", "give"},     {"given", "give"},   {"found", "find"},   {"thought", "think"}, {"brought", "bring"},
      {"bought", "buy"},   {"caught", "catch"},  {"taught", "teach"}, {"felt", "feel"},    {"kept", "keep"},   {"left", "leave"},
      {"held", "hold"},    {"stood", "stand"},   {"sat", "sit"},      {"slept", "sleep"},  {"woke", "wake"},   {"woken", "wake"},
      {"wore", "wear"},    {"worn", "wear"},     {"threw", "throw"},  {"thrown", "throw"}, {"drew", "draw"},   {"drawn", "draw"},
      {"drank", "drink"},  {"drunk", "drink"},   {"began", "begin"},  {"begun", "begin"},  {"broke", "break"}, {"broken", "break"},
      {"chose", "choose"}, {"chosen", "choose"}, {"fell", "fall"},    {"fallen", "fall"},  {"froze", "freeze"}, {"frozen", "freeze"},
      {"hung", "hang"},    {"hid", "hide"},      {"laid", "lay"},     {"led", "lead"},     {"lit", "light"},   {"lost", "lose"},
      {"meant", "mean"},   {"met", "meet"},      {"paid", "pay"},     {"rode", "ride"},    {"rose", "rise"},   {"sold", "sell"},
      {"sent", "send"},    {"shook", "shake"},   {"shot", "shoot"},   {"spent", "spend"},  {"spun", "spin"},   {"stuck", "stick"},
      {"swept", "sweep"},  {"swam", "swim"},     {"tore", "tear"},    {"torn", "tear"},    {"understood", "understand"},
      {"wrote", "write"},  {"written", "write"}, {"won", "win"},      {"fed", "feed"},     {"fought", "fight"}, {"flew", "fly"},
      {"forgot", "forget"}, {"grew", "grow"},    {"heard", "hear"},   {"knew", "know"},    {"known", "know"},  {"built", "build"},
      {"burnt", "burn"},   {"dug", "dig"},       {"bent", "bend"},    {"blew", "blow"},    {"children", "child"}, {"men", "man"},
      {"women", "woman"},  {"feet", "foot"},     {"teeth", "tooth"},  {"knives", "knife"}, {"leaves", "leaf"}, {"loaves", "loaf"},
      {"shelves", "shelf"}, {"mice", "mouse"},   {"people", "person"}, {"dishes", "dish"}, {"clothes", "clothes"},
  };
  return table;
}

/// Candidate lemmas for a word, most likely first; the surface form is not
/// included. Irregular forms come from a fixed table, otherwise -s/-es/-ed/-ing
/// are stripped (with e-restoration and consonant undoubling variants).
inline std::vector<std::string> lemma_candidates(std::string_view word)
{
  const std::string w = text::fold_case(word);
  std::vector<std::string> out;
  auto add = [&](std::string s) {
    if (s.size() >= 2 && s != w && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
  };
  if (const auto it = irregular_lemmas().find(w); it != irregular_lemmas().end()) {
    add(it->second);
    return out;
  }
  const auto stem_variants = [&](std::string stem) {
    add(stem);
    add(stem + "e");
    if (stem.size() >= 2 && stem[stem.size() - 1] == stem[stem.size() - 2]) add(stem.substr(0, stem.size() - 1));
  };
  if (text::ends_with(w, "ies") && w.size() > 4) add(w.substr(0, w.size() - 3) + "y");
  if (text::ends_with(w, "ing") && w.size() > 5) stem_variants(w.substr(0, w.size() - 3));
  if (text::ends_with(w, "ied") && w.size() > 4) add(w.substr(0, w.size() - 3) + "y");
  if (text::ends_with(w, "ed") && w.size() > 4) {
    stem_variants(w.substr(0, w.size() - 2));
    add(w.substr(0, w.size() - 1));
  }
  if (text::ends_with(w, "es") && w.size() > 3) add(w.substr(0, w.size() - 2));
  if (text::ends_with(w, "s") && !text::ends_with(w, "ss") && w.size() > 2) add(w.substr(0, w.size() - 1));
  return out;
}

/// Score for one word: the first lemma candidate in the lexicon, else the surface.
inline std::optional<double> word_concreteness(std::string_view word, const ConcretenessLexicon& lexicon)
{
  for (const auto& lemma : lemma_candidates(word))
    if (auto s = lexicon.find(lemma)) return s;
  return lexicon.find(word);
}

/// Highest score among the action's verbs and nouns; empty when none of them
/// is in the lexicon.
inline std::optional<double> concreteness_score(std::span<const std::string> tokens, std::span<const std::string> tags,
                                                const ConcretenessLexicon& lexicon)
{
  if (tokens.size() != tags.size()) fail(ErrorCode::LengthMismatch, "tokens and tags differ in length");
  std::optional<double> best;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!text::starts_with(tags[i], "VB") && !text::starts_with(tags[i], "NN")) continue;
    if (const auto s = word_concreteness(tokens[i], lexicon); s && (!best || *s > *best)) best = s;
  }
  return best;
}

// ---- taxonomy / similarity ----------------------------------------------------

/// Single-rooted tree of labels; depth(root) == 1.
class Taxonomy {
 public:
  Taxonomy() = default;

  /// Build from (child, parent) rows; the root is the row whose parent is itself.
  explicit Taxonomy(const std::vector<std::pair<std::string, std::string>>& edges)
  {
    std::map<std::string, std::string> parent_of;
    std::optional<std::string> root;
    for (const auto& [c_raw, p_raw] : edges) {
      const auto c = text::fold_case(c_raw);
      const auto p = text::fold_case(p_raw);
      if (c == p) {
        if (root && *root != c) fail(ErrorCode::Parse, "taxonomy has more than one root: " + *root + ", " + c);
        root = c;
        continue;
      }
      const auto [it, inserted] = parent_of.emplace(c, p);
      if (!inserted && it->second != p) fail(ErrorCode::Parse, "taxonomy node '" + c + "' has two parents");
    }
    if (!root) fail(ErrorCode::Parse, "taxonomy has no root row (child == parent)");
    if (parent_of.contains(*root)) fail(ErrorCode::Parse, "taxonomy root '" + *root + "' also has a parent");

    add_node(*root);
    for (const auto& [c, p] : parent_of) {
      add_node(c);
      add_node(p);
    }
    parent_.assign(labels_.size(), npos);
    for (const auto& [c, p] : parent_of) parent_[index_.at(c)] = index_.at(p);
    root_ = index_.at(*root);
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (i != root_ && parent_[i] == npos) fail(ErrorCode::Parse, "taxonomy node '" + labels_[i] + "' has no parent");

    depth_.assign(labels_.size(), 0);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      std::size_t d = 1, cur = i;
      while (cur != root_) {
        cur = parent_[cur];
        if (++d > labels_.size()) fail(ErrorCode::Parse, "taxonomy has a cycle through '" + labels_[i] + "'");
      }
      depth_[i] = d;
    }
  }

  bool contains(std::string_view label) const { return index_.contains(text::fold_case(label)); }
  std::size_t size() const { return labels_.size(); }
  const std::string& root() const { return labels_[root_]; }

  std::size_t depth(std::string_view label) const { return depth_[id(label)]; }

  /// Deepest node that is an ancestor of (or equal to) both labels.
  std::string lcs(std::string_view a, std::string_view b) const { return labels_[lcs_id(id(a), id(b))]; }

  std::size_t lcs_depth(std::string_view a, std::string_view b) const { return depth_[lcs_id(id(a), id(b))]; }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  void add_node(const std::string& label)
  {
    if (index_.emplace(label, labels_.size()).second) labels_.push_back(label);
  }

  std::size_t id(std::string_view label) const
  {
    const auto it = index_.find(text::fold_case(label));
    if (it == index_.end()) fail(ErrorCode::UnknownLabel, "'" + std::string(label) + "' is not in the taxonomy");
    return it->second;
  }

  std::size_t lcs_id(std::size_t a, std::size_t b) const
  {
    std::unordered_set<std::size_t> ancestors;
    for (std::size_t cur = a;; cur = parent_[cur]) {
      ancestors.insert(cur);
      if (cur == root_) break;
    }
    for (std::size_t cur = b;; cur = parent_[cur]) {
      if (ancestors.contains(cur)) return cur;
      if (cur == root_) break;
    }
    return root_;
  }

  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> depth_;
  std::size_t root_ = 0;
};

inline Taxonomy parse_taxonomy(std::string_view contents)
{
  std::vector<std::pair<std::string, std::string>> edges;
  io::for_each_tsv_row(contents, [&](const std::vector<std::string>& row, std::size_t line) {
    if (row.size() < 2) fail(ErrorCode::Parse, "taxonomy line " + std::to_string(line) + ": expected child<TAB>parent");
    edges.emplace_back(text::trim(row[0]), text::trim(row[1]));
  });
  return Taxonomy(edges);
}

inline Taxonomy load_taxonomy(const std::filesystem::path& path) { return parse_taxonomy(io::read_file(path)); }

/// Wu-Palmer: 2 * depth(lcs) / (depth(a) + depth(b)).
inline double wup_similarity(const Taxonomy& tax, std::string_view a, std::string_view b)
{
  const double da = static_cast<double>(tax.depth(a));
  const double db = static_cast<double>(tax.depth(b));
  return 2.0 * static_cast<double>(tax.lcs_depth(a, b)) / (da + db);
}

inline double cosine(const Vector& u, const Vector& v)
{
  if (u.size() != v.size()) fail(ErrorCode::DimMismatch, "cosine of vectors with different dims");
  const double nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0) fail(ErrorCode::ZeroVector, "cosine of a zero vector");
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

// ---- video feature files (VFB1) ------------------------------------------------

/// Rows of concat(frame_feature, sequence_feature) for one miniclip, 1 per sampled second.
struct FeatureRows {
  std::uint32_t dim_frame = 0;
  std::uint32_t dim_seq = 0;
  std::vector<float> values; // row-major, rows() * width()

  std::size_t width() const { return static_cast<std::size_t>(dim_frame) + dim_seq; }
  std::size_t rows() const { return width() == 0 ? 0 : values.size() / width(); }
  std::span<const float> row(std::size_t r) const { return std::span<const float>(values).subspan(r * width(), width()); }
  bool operator==(const FeatureRows&) const = default;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t pos)
{
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

} // namespace detail

/// VFB1: magic, u32 dim_frame, u32 dim_seq, u32 row_count (little endian), then
/// row_count * (dim_frame + dim_seq) little-endian float32 values.
inline std::string encode_vfb1(const FeatureRows& f)
{
  if (f.width() == 0 ? !f.values.empty() : f.values.size() % f.width() != 0)
    fail(ErrorCode::DimMismatch, "feature values do not fill whole rows");
  std::string out = "VFB1";
  detail::put_u32(out, f.dim_frame);
  detail::put_u32(out, f.dim_seq);
  detail::put_u32(out, static_cast<std::uint32_t>(f.rows()));
  for (float x : f.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

inline FeatureRows decode_vfb1(std::string_view bytes, const std::string& origin = "<vfb>")
{
  if (bytes.size() < 4 || bytes.substr(0, 4) != "VFB1") fail(ErrorCode::BadMagic, origin + ": missing VFB1 magic");
  if (bytes.size() < 16) fail(ErrorCode::TruncatedFile, origin + ": header truncated");
  FeatureRows f;
  f.dim_frame = detail::get_u32(bytes, 4);
  f.dim_seq = detail::get_u32(bytes, 8);
  const std::uint64_t rows = detail::get_u32(bytes, 12);
  if (rows > 0 && f.width() == 0) fail(ErrorCode::DimMismatch, origin + ": rows declared with zero feature width");
  const std::uint64_t expected = 16 + rows * f.width() * 4;
  if (bytes.size() < expected) fail(ErrorCode::TruncatedFile, origin + ": expected " + std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
  if (bytes.size() > expected) fail(ErrorCode::DimMismatch, origin + ": " + std::to_string(bytes.size() - expected) + " trailing bytes after declared rows");
  f.values.resize(rows * f.width());
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = std::bit_cast<float>(detail::get_u32(bytes, 16 + 4 * i));
  return f;
}

inline FeatureRows load_feature_bank(const std::filesystem::path& path) { return decode_vfb1(io::read_file(path), path.string()); }

inline void save_feature_bank(const std::filesystem::path& path, const FeatureRows& f) { io::write_file_atomic(path, encode_vfb1(f)); }

/// Directory of `<miniclip_id>.vfb` files sharing one pair of dims.
class VideoFeatureBank {
 public:
  VideoFeatureBank() = default;
  explicit VideoFeatureBank(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void insert(const std::string& miniclip_id, FeatureRows rows)
  {
    check_dims(rows, miniclip_id);
    cache_[miniclip_id] = std::move(rows);
  }

  /// Rows for a miniclip, or nullptr if the bank has no file for it.
  const FeatureRows* find(const std::string& miniclip_id) const
  {
    if (const auto it = cache_.find(miniclip_id); it != cache_.end()) return &it->second;
    if (dir_.empty()) return nullptr;
    const auto path = dir_ / (miniclip_id + ".vfb");
    if (!std::filesystem::exists(path)) return nullptr;
    auto rows = load_feature_bank(path);
    check_dims(rows, miniclip_id);
    return &cache_.emplace(miniclip_id, std::move(rows)).first->second;
  }

  std::optional<std::pair<std::uint32_t, std::uint32_t>> dims() const { return dims_; }

 private:
  void check_dims(const FeatureRows& rows, const std::string& id) const
  {
    if (!dims_) dims_ = std::pair{rows.dim_frame, rows.dim_seq};
    else if (dims_->first != rows.dim_frame || dims_->second != rows.dim_seq)
      fail(ErrorCode::DimMismatch, "feature file for " + id + " has different dims from the rest of the bank");
  }

  std::filesystem::path dir_;
  mutable std::map<std::string, FeatureRows> cache_;
  mutable std::optional<std::pair<std::uint32_t, std::uint32_t>> dims_;
};

// ---- object detections ----------------------------------------------------------

struct Detection {
  std::string miniclip_id;
  int frame = 0;
  std::string label;
  double confidence = 0.0;
};

inline std::map<std::string, std::vector<Detection>> load_detections(const std::filesystem::path& path, double min_confidence = 0.0)
{
  std::map<std::string, std::vector<Detection>> out;
  for (const auto& row : io::read_jsonl(path)) {
    Detection d{io::field<std::string>(row, "miniclip_id"), io::field<int>(row, "frame"), io::field<std::string>(row, "label"),
                io::field<double>(row, "confidence")};
    if (d.confidence >= min_confidence) out[d.miniclip_id].push_back(std::move(d));
  }
  return out;
}

/// Per-action text features; the multimodal model picks from these.
struct ActionFeatures {
  Vector action_emb;
  Vector pos_emb;
  std::pair<Vector, Vector> context_s; // words before / after, same sentence
  std::pair<Vector, Vector> context_a; // previous / next action
  std::optional<double> concreteness;
};

inline nlohmann::json vector_to_json(const Vector& v)
{
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vector vector_from_json(const nlohmann::json& j)
{
  if (!j.is_array()) fail(ErrorCode::Parse, "expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(ErrorCode::Parse, "expected a numeric array");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

} // namespace vlogvis
