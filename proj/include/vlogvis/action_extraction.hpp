#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "text.hpp"
#include "transcript.hpp"

namespace vlogvis {

inline const std::set<std::string, std::less<>>& penn_tags()
{
  static const std::set<std::string, std::less<>> tags = {
      "CC",  "CD",  "DT",   "EX",  "FW",  "IN",  "JJ",  "JJR", "JJS", "LS",  "MD",  "NN",    "NNS",   "NNP",
      "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP",  "SYM", "TO",  "UH",    "VB",    "VBD",
      "VBG", "VBN", "VBP",  "VBZ", "WDT", "WP",  "WP$", "WRB", ".",   ",",   ":",   "``",    "''",    "-LRB-",
      "-RRB-", "#", "$"};
  return tags;
}

inline bool is_penn_tag(std::string_view tag) { return penn_tags().contains(tag); }
inline bool is_verb_tag(std::string_view tag) { return text::starts_with(tag, "VB"); }
inline bool is_noun_tag(std::string_view tag) { return text::starts_with(tag, "NN"); }

struct TaggedToken {
  std::string surface;
  std::string pos;
  std::size_t cue_index = 0;

  bool operator==(const TaggedToken&) const = default;
};

/// A transcript token before tagging.
struct RawToken {
  std::string surface;
  std::size_t cue_index = 0;
  bool sentence_end = false; // followed by . ! or ?
};

struct Sentence {
  std::vector<TaggedToken> tokens;
  std::size_t index = 0;
};

struct TokenSpan {
  std::size_t start = 0; // inclusive
  std::size_t end = 0;   // exclusive

  std::size_t size() const { return end - start; }
  bool operator==(const TokenSpan&) const = default;
};

struct ActionCandidate {
  std::vector<TaggedToken> tokens;
  std::size_t sentence_index = 0;
  TokenSpan span;
  double time_s = 0.0;

  std::string text() const
  {
    std::vector<std::string> words;
    for (const auto& t : tokens) words.push_back(t.surface);
    return text::join(words, " ");
  }
};

/// Chunker configuration. Loaded from a `key = value` file so the rules are data.
struct ChunkRules {
  std::size_t max_len = 7;
  double gap_s = 5.0;
  std::set<std::string, std::less<>> auxiliaries = {"be",    "is",   "are",  "was",    "were",  "am",   "been",
                                                    "being", "do",   "does", "did",    "have",  "has",  "had",
                                                    "will",  "would", "can", "could",  "should", "may", "might",
                                                    "must",  "gonna", "'re", "'s",     "'m",    "'ve",  "'ll",
                                                    "'d"};
  std::set<std::string, std::less<>> extend_tags = {"RB", "RP",  "DT", "PRP", "PRP$", "JJ", "NN",
                                                    "NNS", "NNP", "IN", "TO",  "CD",   "POS"};
  std::string gerund_tag = "VBG";
  bool include_preceding_adverb = true;
  // Drop a chunk that is only a verb plus TO/IN and is cut off by another verb
  // ("going to | take"), the following verb starts the real action.
  bool drop_catenative = true;
  // A PRP that ends a chunk right before a verb is the next clause's subject
  // ("take it out | it 's"), so it is left out.
  bool trim_subject_pronoun = true;
};

namespace detail {

/// Comma and/or whitespace separated.
inline std::set<std::string, std::less<>> parse_word_list(std::string_view value)
{
  std::set<std::string, std::less<>> out;
  for (const auto& piece : text::split(value, ','))
    for (const auto& w : text::split_whitespace(piece)) out.insert(w);
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key)
{
  const auto f = text::fold_case(v);
  if (f == "true" || f == "1" || f == "yes") return true;
  if (f == "false" || f == "0" || f == "no") return false;
  fail(ErrorCode::Parse, "bad boolean for " + key + ": " + v);
}

} // namespace detail

inline ChunkRules parse_chunk_rules(std::string_view contents)
{
  ChunkRules rules;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(contents, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Parse, "chunk rules line " + std::to_string(line_no) + ": expected key = value");
    const auto key = text::trim(line.substr(0, eq));
    const auto value = text::trim(line.substr(eq + 1));
    try {
      if (key == "max_len") rules.max_len = std::stoul(value);
      else if (key == "gap_s") rules.gap_s = std::stod(value);
      else if (key == "auxiliaries") rules.auxiliaries = detail::parse_word_list(text::fold_case(value));
      else if (key == "extend_tags") rules.extend_tags = detail::parse_word_list(value);
      else if (key == "gerund_tag") rules.gerund_tag = value;
      else if (key == "include_preceding_adverb") rules.include_preceding_adverb = detail::parse_bool(value, key);
      else if (key == "drop_catenative") rules.drop_catenative = detail::parse_bool(value, key);
      else if (key == "trim_subject_pronoun") rules.trim_subject_pronoun = detail::parse_bool(value, key);
      else fail(ErrorCode::Parse, "unknown chunk rule key '" + key + "'");
    } catch (const std::logic_error&) {
      fail(ErrorCode::Parse, "bad value for " + key + ": " + value);
    }
  }
  if (rules.max_len == 0) fail(ErrorCode::Parse, "max_len must be positive");
  for (const auto& t : rules.extend_tags)
    if (!is_penn_tag(t)) fail(ErrorCode::Parse, "extend_tags: not a Penn tag: " + t);
  return rules;
}

inline ChunkRules load_chunk_rules(const std::filesystem::path& path) { return parse_chunk_rules(io::read_file(path)); }

// ---- tokenization ----------------------------------------------------------

namespace detail {

inline bool is_sentence_final(char c) { return c == '.' || c == '!' || c == '?'; }

inline bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80 || c == '\'' || c == '$' || c == '%'; }

/// Penn-style contraction split: "you're" -> "you" "'re", "don't" -> "do" "n't".
inline std::vector<std::string> split_contraction(const std::string& word)
{
  const auto lower = text::fold_case(word);
  if (lower.size() > 3 && text::ends_with(lower, "n't"))
    return {word.substr(0, word.size() - 3), word.substr(word.size() - 3)};
  static const std::array<std::string_view, 6> suffixes = {"'re", "'s", "'m", "'ve", "'ll", "'d"};
  for (auto suf : suffixes) {
    if (lower.size() > suf.size() && text::ends_with(lower, suf))
      return {word.substr(0, word.size() - suf.size()), word.substr(word.size() - suf.size())};
  }
  return {word};
}

inline std::string normalize_apostrophes(std::string_view s)
{
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    // U+2019 RIGHT SINGLE QUOTATION MARK
    if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
        static_cast<unsigned char>(s[i + 2]) == 0x99) {
      out.push_back('\'');
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

} // namespace detail

/// Tokenize one piece of caption text. Edge punctuation is stripped; a trailing
/// `.`, `!` or `?` marks the preceding token as sentence-final.
inline std::vector<RawToken> tokenize_text(std::string_view caption, std::size_t cue_index = 0)
{
  std::vector<RawToken> out;
  for (const auto& raw_word : text::split_whitespace(detail::normalize_apostrophes(caption))) {
    std::size_t b = 0, e = raw_word.size();
    while (b < e && !detail::is_word_char(static_cast<unsigned char>(raw_word[b]))) ++b;
    while (e > b && !detail::is_word_char(static_cast<unsigned char>(raw_word[e - 1]))) --e;
    bool final_mark = false;
    for (std::size_t k = e; k < raw_word.size(); ++k) final_mark |= detail::is_sentence_final(raw_word[k]);
    std::string core = raw_word.substr(b, e - b);
    while (!core.empty() && core.front() == '\'') core.erase(0, 1);
    if (core.empty()) {
      if (final_mark && !out.empty()) out.back().sentence_end = true;
      continue;
    }
    for (auto& piece : detail::split_contraction(core)) out.push_back({std::move(piece), cue_index, false});
    if (final_mark) out.back().sentence_end = true;
  }
  return out;
}

inline std::vector<RawToken> tokenize_transcript(const Transcript& t)
{
  std::vector<RawToken> out;
  for (std::size_t i = 0; i < t.cues.size(); ++i) {
    auto toks = tokenize_text(t.cues[i].text, i);
    out.insert(out.end(), std::make_move_iterator(toks.begin()), std::make_move_iterator(toks.end()));
  }
  return out;
}

// ---- tagging ---------------------------------------------------------------

/// Case-folded word -> Penn tag table.
class TagLexicon {
 public:
  TagLexicon() = default;
  explicit TagLexicon(std::unordered_map<std::string, std::string> entries)
  {
    for (auto& [w, t] : entries) insert(w, t);
  }

  void insert(std::string_view word, std::string_view tag)
  {
    if (!is_penn_tag(tag)) fail(ErrorCode::Parse, "not a Penn tag: '" + std::string(tag) + "'");
    entries_[text::fold_case(word)] = std::string(tag);
  }

  const std::string* find(std::string_view word) const
  {
    const auto it = entries_.find(text::fold_case(word));
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::string> entries_;
};

inline TagLexicon parse_tag_lexicon(std::string_view contents)
{
  TagLexicon lex;
  io::for_each_tsv_row(contents, [&](const std::vector<std::string>& row, std::size_t line) {
    if (row.size() < 2) fail(ErrorCode::Parse, "tag lexicon line " + std::to_string(line) + ": expected word<TAB>tag");
    lex.insert(text::trim(row[0]), text::trim(row[1]));
  });
  return lex;
}

inline TagLexicon load_tag_lexicon(const std::filesystem::path& path) { return parse_tag_lexicon(io::read_file(path)); }

namespace detail {

inline const std::string* builtin_clitic_tag(std::string_view word)
{
  static const std::unordered_map<std::string, std::string> clitics = {
      {"'re", "VBP"}, {"'s", "VBZ"}, {"'m", "VBP"}, {"'ve", "VBP"}, {"'ll", "MD"}, {"'d", "MD"}, {"n't", "RB"}};
  const auto it = clitics.find(text::fold_case(word));
  return it == clitics.end() ? nullptr : &it->second;
}

} // namespace detail

/// Tag each token by lexicon lookup; unknown words become NN.
inline std::vector<TaggedToken> tag_with_lexicon(std::span<const RawToken> tokens, const TagLexicon& lexicon)
{
  std::vector<TaggedToken> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) {
    const std::string* tag = lexicon.find(tok.surface);
    if (!tag) tag = detail::builtin_clitic_tag(tok.surface);
    out.push_back({tok.surface, tag ? *tag : std::string("NN"), tok.cue_index});
  }
  return out;
}

inline std::vector<TaggedToken> tag_with_lexicon(std::span<const std::string> words, const TagLexicon& lexicon)
{
  std::vector<RawToken> raw;
  for (const auto& w : words) raw.push_back({w, 0, false});
  return tag_with_lexicon(std::span<const RawToken>(raw), lexicon);
}

/// Pre-tagged CoNLL-style sidecar: `surface<TAB>tag` rows, blank line = sentence break.
struct PosSidecar {
  std::vector<std::pair<std::string, std::string>> tokens;
  std::set<std::size_t> break_after; // token indices that close a sentence
};

inline PosSidecar parse_pos_sidecar(std::string_view contents)
{
  PosSidecar out;
  std::size_t line_no = 0;
  for (auto line : text::split(contents, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) {
      if (!out.tokens.empty()) out.break_after.insert(out.tokens.size() - 1);
      continue;
    }
    const auto row = text::split(line, '\t');
    if (row.size() < 2) fail(ErrorCode::Parse, "POS sidecar line " + std::to_string(line_no) + ": expected surface<TAB>tag");
    const auto tag = text::trim(row[1]);
    if (!is_penn_tag(tag)) fail(ErrorCode::Parse, "POS sidecar line " + std::to_string(line_no) + ": not a Penn tag '" + tag + "'");
    out.tokens.emplace_back(row[0], tag);
  }
  // a blank line at end of file is not a break between tokens
  if (!out.tokens.empty()) out.break_after.erase(out.tokens.size() - 1);
  return out;
}

/// Attach sidecar tags to transcript tokens, checking the counts line up.
inline std::vector<TaggedToken> apply_sidecar(std::span<const RawToken> tokens, const PosSidecar& sidecar)
{
  if (tokens.size() != sidecar.tokens.size())
    fail(ErrorCode::TagTokenMismatch, "sidecar has " + std::to_string(sidecar.tokens.size()) + " tokens, transcript has " +
                                          std::to_string(tokens.size()));
  std::vector<TaggedToken> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) out.push_back({tokens[i].surface, sidecar.tokens[i].second, tokens[i].cue_index});
  return out;
}

// ---- sentences and chunks ---------------------------------------------------

/// Group tagged tokens into sentences. Boundaries fall after sentence-final
/// punctuation, at cue gaps longer than `gap_s`, and at any `extra_breaks`
/// (token indices closing a sentence, e.g. from a sidecar).
inline std::vector<Sentence> split_sentences(const Transcript& t, std::span<const TaggedToken> tags, double gap_s = 5.0,
                                             const std::set<std::size_t>& extra_breaks = {})
{
  const auto raw = tokenize_transcript(t);
  if (raw.size() != tags.size())
    fail(ErrorCode::TagTokenMismatch,
         "tag stream has " + std::to_string(tags.size()) + " tokens, transcript has " + std::to_string(raw.size()));

  std::vector<Sentence> out;
  Sentence cur;
  auto close = [&] {
    if (cur.tokens.empty()) return;
    cur.index = out.size();
    out.push_back(std::move(cur));
    cur = Sentence{};
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (i > 0 && raw[i].cue_index != raw[i - 1].cue_index) {
      const double gap = t.cues[raw[i].cue_index].start_s - t.cues[raw[i - 1].cue_index].end_s;
      if (gap > gap_s) close();
    }
    cur.tokens.push_back({tags[i].surface, tags[i].pos, raw[i].cue_index});
    if (raw[i].sentence_end || extra_breaks.contains(i)) close();
  }
  close();
  return out;
}

/// Rule chunker standing in for a constituency parser. A head is a verb-tagged
/// token outside the auxiliary list; the chunk extends right over
/// `extend_tags` (and gerunds) until another verb, the sentence end, or
/// `max_len` tokens. An RB right before the head joins the chunk.
inline std::vector<ActionCandidate> extract_candidates(const Sentence& s, const ChunkRules& rules)
{
  std::vector<ActionCandidate> out;
  const auto& toks = s.tokens;
  const std::size_t n = toks.size();
  std::size_t prev_end = 0;
  std::size_t i = 0;
  while (i < n) {
    const bool head = is_verb_tag(toks[i].pos) && !rules.auxiliaries.contains(text::fold_case(toks[i].surface));
    if (!head) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (rules.include_preceding_adverb && i > prev_end && toks[i - 1].pos == "RB" && rules.max_len >= 2) start = i - 1;
    std::size_t j = i + 1;
    while (j < n && j - start < rules.max_len) {
      const auto& tag = toks[j].pos;
      if (rules.extend_tags.contains(tag) || tag == rules.gerund_tag) ++j;
      else break;
    }
    const bool cut_by_verb = j < n && is_verb_tag(toks[j].pos) && toks[j].pos != rules.gerund_tag;
    if (rules.trim_subject_pronoun && j < n && is_verb_tag(toks[j].pos) && j - i >= 2 && toks[j - 1].pos == "PRP") --j;
    bool keep = true;
    if (rules.drop_catenative && cut_by_verb && j - i >= 2) {
      keep = false;
      for (std::size_t k = i + 1; k < j; ++k)
        if (toks[k].pos != "TO" && toks[k].pos != "IN") keep = true;
    }
    if (keep) {
      ActionCandidate c;
      c.tokens.assign(toks.begin() + static_cast<std::ptrdiff_t>(start), toks.begin() + static_cast<std::ptrdiff_t>(j));
      c.sentence_index = s.index;
      c.span = {start, j};
      out.push_back(std::move(c));
      prev_end = j;
    }
    i = j;
  }
  return out;
}

/// Start time of the cue holding the candidate's first token.
inline double timestamp_action(const ActionCandidate& a, const Transcript& t)
{
  if (a.tokens.empty()) fail(ErrorCode::DanglingCueIndex, "candidate has no tokens");
  const auto idx = a.tokens.front().cue_index;
  if (idx >= t.cues.size())
    fail(ErrorCode::DanglingCueIndex, "cue index " + std::to_string(idx) + " out of range for " + t.video_id);
  return t.cues[idx].start_s;
}

/// Sentences plus candidates for one transcript, candidates timestamped and in
/// transcript order.
struct ExtractionResult {
  std::vector<Sentence> sentences;
  std::vector<ActionCandidate> candidates;
};

inline ExtractionResult extract_actions(const Transcript& t, std::span<const TaggedToken> tags, const ChunkRules& rules,
                                        const std::set<std::size_t>& extra_breaks = {})
{
  ExtractionResult r;
  r.sentences = split_sentences(t, tags, rules.gap_s, extra_breaks);
  for (const auto& s : r.sentences) {
    for (auto& c : extract_candidates(s, rules)) {
      c.time_s = timestamp_action(c, t);
      r.candidates.push_back(std::move(c));
    }
  }
  return r;
}

} // namespace vlogvis
