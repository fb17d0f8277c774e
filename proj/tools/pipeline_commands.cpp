#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "commands.hpp"
#include "vlogvis/action_extraction.hpp"
#include "vlogvis/annotation.hpp"
#include "vlogvis/annotation_server.hpp"
#include "vlogvis/clip_segmentation.hpp"
#include "vlogvis/parallel.hpp"
#include "vlogvis/rng.hpp"
#include "vlogvis/transcript.hpp"

namespace vlogvis::cli {

namespace {

std::string action_id_for(const std::string& video_id, std::size_t k)
{
  char buf[24];
  std::snprintf(buf, sizeof buf, "_a%04zu", k);
  return video_id + buf;
}

std::map<std::string, ManifestEntry> manifest_by_id(const fs::path& path)
{
  std::map<std::string, ManifestEntry> out;
  for (auto& e : load_manifest(path)) {
    const auto id = e.video_id;
    if (!out.emplace(id, std::move(e)).second) fail(ErrorCode::Parse, "duplicate video_id '" + id + "' in manifest");
  }
  return out;
}

std::vector<Miniclip> load_miniclips(const fs::path& path)
{
  std::vector<Miniclip> out;
  for (const auto& row : io::read_jsonl(path)) out.push_back(miniclip_from_json(row));
  return out;
}

// ---- ingest -------------------------------------------------------------------------

struct IngestOptions {
  std::string manifest, out, dropped;
  double min_rate = 0.5;
  std::size_t jobs = 1;
};

void run_ingest(const IngestOptions& o)
{
  const auto entries = load_manifest(o.manifest);
  std::set<std::string> seen;
  for (const auto& e : entries)
    if (!seen.insert(e.video_id).second) fail(ErrorCode::Parse, "duplicate video_id '" + e.video_id + "' in manifest");
  auto transcripts = parallel_map<Transcript>(entries.size(), o.jobs, [&](std::size_t i) {
    const auto& e = entries[i];
    return parse_transcript(io::read_file(e.transcript_path), e.video_id, e.duration_s);
  });
  std::map<std::string, std::string> channel;
  for (const auto& e : entries) channel[e.video_id] = e.channel;

  auto split = filter_by_density(std::move(transcripts), o.min_rate);
  auto by_id = [](const Transcript& a, const Transcript& b) { return a.video_id < b.video_id; };
  std::sort(split.kept.begin(), split.kept.end(), by_id);
  std::sort(split.dropped.begin(), split.dropped.end(), by_id);

  std::vector<json> kept;
  for (const auto& t : split.kept) {
    auto j = to_json(t);
    j["channel"] = channel[t.video_id];
    j["words_per_second"] = words_per_second(t);
    kept.push_back(std::move(j));
  }
  io::write_jsonl(o.out, kept);
  if (!o.dropped.empty()) {
    std::vector<json> rows;
    for (const auto& t : split.dropped) rows.push_back({{"video_id", t.video_id}, {"words_per_second", words_per_second(t)}});
    io::write_jsonl(o.dropped, rows);
  }
  std::cout << "kept " << split.kept.size() << " of " << entries.size() << " videos\n";
}

// ---- extract ------------------------------------------------------------------------

struct ExtractOptions {
  std::string transcripts, vtt, video_id = "video", tag_lexicon, pos_dir, rules, out;
  double duration = 0.0;
};

void run_extract(const ExtractOptions& o)
{
  std::vector<Transcript> transcripts;
  if (!o.vtt.empty()) transcripts.push_back(parse_transcript(io::read_file(o.vtt), o.video_id, o.duration));
  else if (!o.transcripts.empty()) transcripts = load_transcripts(o.transcripts);
  else fail(ErrorCode::Config, "extract needs --transcripts or --vtt");

  const ChunkRules rules = o.rules.empty() ? ChunkRules{} : load_chunk_rules(o.rules);
  std::optional<TagLexicon> lexicon;
  if (!o.tag_lexicon.empty()) lexicon = load_tag_lexicon(o.tag_lexicon);

  std::sort(transcripts.begin(), transcripts.end(), [](const Transcript& a, const Transcript& b) { return a.video_id < b.video_id; });
  std::vector<json> rows;
  for (const auto& t : transcripts) {
    const auto raw = tokenize_transcript(t);
    std::vector<TaggedToken> tags;
    std::set<std::size_t> breaks;
    const fs::path sidecar = o.pos_dir.empty() ? fs::path() : fs::path(o.pos_dir) / (t.video_id + ".pos");
    if (!sidecar.empty() && fs::exists(sidecar)) {
      const auto parsed = parse_pos_sidecar(io::read_file(sidecar));
      tags = apply_sidecar(raw, parsed);
      breaks = parsed.break_after;
    } else if (lexicon) {
      tags = tag_with_lexicon(raw, *lexicon);
    } else {
      fail(ErrorCode::Config, "no POS sidecar for " + t.video_id + " and no --tag-lexicon");
    }
    const auto result = extract_actions(t, tags, rules, breaks);
    for (std::size_t k = 0; k < result.candidates.size(); ++k) {
      const auto& c = result.candidates[k];
      ActionRecord a;
      a.action_id = action_id_for(t.video_id, k);
      a.video_id = t.video_id;
      for (const auto& tok : c.tokens) {
        a.tokens.push_back(tok.surface);
        a.tags.push_back(tok.pos);
      }
      a.time_s = c.time_s;
      a.sentence_index = c.sentence_index;
      a.span_start = c.span.start;
      a.span_end = c.span.end;
      for (const auto& tok : result.sentences[c.sentence_index].tokens) a.sentence.push_back(tok.surface);
      rows.push_back(to_json(a));
    }
  }
  io::write_jsonl(o.out, rows);
  std::cout << "extracted " << rows.size() << " candidate actions\n";
}

// ---- segment ------------------------------------------------------------------------

struct SegmentOptions {
  std::string transcripts, actions, out;
  double max_core = 60.0, pad = 15.0;
  std::size_t jobs = 1;
};

void run_segment(const SegmentOptions& o)
{
  if (!(o.max_core > 0.0) || o.pad < 0.0) fail(ErrorCode::Config, "max-core must be positive and pad non-negative");
  std::map<std::string, double> duration;
  for (const auto& t : load_transcripts(o.transcripts)) duration[t.video_id] = t.duration_s;
  std::map<std::string, std::vector<TimedAction>> per_video;
  for (const auto& a : load_actions(o.actions)) {
    if (!duration.contains(a.video_id)) fail(ErrorCode::Parse, "action " + a.action_id + " refers to unknown video " + a.video_id);
    per_video[a.video_id].push_back({a.action_id, a.time_s});
  }
  std::vector<std::string> videos;
  for (const auto& [v, _] : per_video) videos.push_back(v);
  const auto clips = parallel_map<std::vector<Miniclip>>(videos.size(), o.jobs, [&](std::size_t i) {
    return segment(videos[i], duration[videos[i]], per_video[videos[i]], o.max_core, o.pad);
  });
  std::vector<json> rows;
  for (const auto& per : clips)
    for (const auto& m : per) rows.push_back(to_json(m));
  io::write_jsonl(o.out, rows);
  std::cout << "wrote " << rows.size() << " miniclips\n";
}

// ---- motion-filter --------------------------------------------------------------------

struct MotionOptions {
  std::string miniclips, manifest, out, dropped, scores;
  double threshold = 0.8;
  std::size_t stride = 100, jobs = 1;
};

void run_motion_filter(const MotionOptions& o)
{
  if (o.stride == 0) fail(ErrorCode::Config, "stride must be positive");
  const auto manifest = manifest_by_id(o.manifest);
  const auto clips = load_miniclips(o.miniclips);
  // nullopt: the clip has fewer than two scoreable sampled frames
  const auto scores = parallel_map<std::optional<double>>(clips.size(), o.jobs, [&](std::size_t i) -> std::optional<double> {
    const auto it = manifest.find(clips[i].video_id);
    if (it == manifest.end()) fail(ErrorCode::Parse, "miniclip " + clips[i].id() + " refers to unknown video");
    try {
      return miniclip_motion_score(it->second.frames_dir, it->second.fps, clips[i], o.stride);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::TooFewFrames) return std::nullopt;
      throw;
    }
  });

  std::vector<Miniclip> scoreable;
  std::vector<double> values;
  std::vector<json> unscorable, score_rows;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    score_rows.push_back({{"miniclip_id", clips[i].id()}, {"motion_score", scores[i] ? json(*scores[i]) : json(nullptr)}});
    if (scores[i]) {
      scoreable.push_back(clips[i]);
      values.push_back(*scores[i]);
    } else {
      unscorable.push_back({{"miniclip_id", clips[i].id()}, {"reason", "unscorable"}});
    }
  }
  const auto split = filter_static(std::move(scoreable), values, o.threshold);
  std::vector<json> kept;
  for (const auto& m : split.kept) kept.push_back(to_json(m));
  io::write_jsonl(o.out, kept);
  if (!o.dropped.empty()) {
    std::vector<json> rows;
    for (const auto& m : split.dropped) rows.push_back({{"miniclip_id", m.id()}, {"reason", "static"}});
    rows.insert(rows.end(), unscorable.begin(), unscorable.end());
    io::write_jsonl(o.dropped, rows);
  }
  if (!o.scores.empty()) io::write_jsonl(o.scores, score_rows);
  std::cout << "kept " << split.kept.size() << " of " << clips.size() << " miniclips\n";
}

// ---- hits ---------------------------------------------------------------------------

struct HitsOptions {
  std::string miniclips, gt_labels, out;
  std::uint64_t seed = 0;
  std::size_t per_hit = 5, max_actions = 7;
};

void run_hits(const HitsOptions& o)
{
  const auto clips = load_miniclips(o.miniclips);
  std::map<std::string, std::vector<std::string>> gt_actions;
  for (const auto& row : io::read_jsonl(o.gt_labels)) {
    const auto a = aggregated_from_json(row);
    gt_actions[a.miniclip_id].push_back(a.action_id);
  }
  std::vector<ClipActions> regular, gt_pool;
  std::set<std::string> in_clips;
  for (const auto& m : clips) {
    in_clips.insert(m.id());
    if (const auto it = gt_actions.find(m.id()); it != gt_actions.end()) {
      // keep the miniclip's time order for the labeled actions
      std::vector<std::string> ordered;
      std::set<std::string> labeled(it->second.begin(), it->second.end());
      for (const auto& a : m.action_ids)
        if (labeled.contains(a)) ordered.push_back(a);
      gt_pool.push_back({m.id(), ordered});
    } else {
      regular.push_back({m.id(), m.action_ids});
    }
  }
  for (const auto& [id, actions] : gt_actions)
    if (!in_clips.contains(id)) gt_pool.push_back({id, actions});
  const auto hits = build_hits(regular, gt_pool, stage_seed(o.seed, "hits"), o.per_hit, o.max_actions);
  std::vector<json> rows;
  for (const auto& h : hits) rows.push_back(to_json(h, true));
  io::write_jsonl(o.out, rows);
  std::cout << "built " << hits.size() << " HITs\n";
}

// ---- serve --------------------------------------------------------------------------

struct ServeOptions {
  std::string hits, gt_labels, log, actions, miniclips, manifest, host = "127.0.0.1", static_dir;
  int port = 8080;
  std::size_t annotators = 3;
};

void run_serve(const ServeOptions& o)
{
  std::vector<Hit> hits;
  for (const auto& row : io::read_jsonl(o.hits)) hits.push_back(hit_from_json(row));
  AnnotationStore store(std::move(hits), load_label_map(o.gt_labels), o.log.empty() ? std::nullopt : std::optional<fs::path>(o.log),
                        o.annotators, utc_timestamp);
  std::map<std::string, std::string> text_of;
  if (!o.actions.empty())
    for (const auto& a : load_actions(o.actions)) text_of[a.action_id] = a.text();
  std::map<std::string, ClipMedia> media;
  if (!o.miniclips.empty() && !o.manifest.empty()) {
    const auto manifest = manifest_by_id(o.manifest);
    for (const auto& m : load_miniclips(o.miniclips))
      if (const auto it = manifest.find(m.video_id); it != manifest.end())
        media[m.id()] = {it->second.frames_dir, it->second.fps, m.start_s, m.end_s};
  }
  AnnotationServer server(store, std::move(media), std::move(text_of));
  if (!o.static_dir.empty() && !server.mount_static(o.static_dir)) fail(ErrorCode::Config, "cannot serve static dir " + o.static_dir);
  if (!server.bind(o.host, o.port)) fail(ErrorCode::Io, "cannot bind " + o.host + ":" + std::to_string(o.port));
  std::cout << "listening on http://" << o.host << ":" << o.port << std::endl;
  server.listen_after_bind();
}

// ---- aggregate / kappa ----------------------------------------------------------------

struct AggregateOptions {
  std::string records, out;
  int raters = 3;
};

std::vector<AnnotationRecord> usable(const std::vector<AnnotationRecord>& all)
{
  std::vector<AnnotationRecord> out;
  for (const auto& r : all)
    if (r.accepted && !r.ground_truth) out.push_back(r);
  return out;
}

void run_aggregate(const AggregateOptions& o)
{
  const auto recs = usable(load_records(o.records));
  std::vector<json> rows;
  for (const auto& a : aggregate(recs, o.raters)) {
    auto j = to_json(a);
    j["visible_votes"] = a.visible_votes;
    j["not_visible_votes"] = a.not_visible_votes;
    rows.push_back(std::move(j));
  }
  io::write_jsonl(o.out, rows);
  std::cout << "aggregated " << rows.size() << " items\n";
}

struct KappaOptions {
  std::string records, counts;
  int raters = 3;
};

void run_kappa(const KappaOptions& o)
{
  std::vector<std::vector<int>> table;
  int n = o.raters;
  if (!o.records.empty()) {
    table = binary_count_table(usable(load_records(o.records)), o.raters);
  } else if (!o.counts.empty()) {
    io::for_each_tsv_row(io::read_file(o.counts), [&](const std::vector<std::string>& row, std::size_t line) {
      std::vector<int> counts;
      for (const auto& cell : row) {
        for (const auto& c : text::split_whitespace(cell)) {
          try {
            counts.push_back(std::stoi(c));
          } catch (const std::exception&) {
            fail(ErrorCode::Parse, "counts line " + std::to_string(line) + ": not an integer '" + c + "'");
          }
        }
      }
      table.push_back(std::move(counts));
    });
  } else {
    fail(ErrorCode::Config, "kappa needs --records or --counts");
  }
  std::cout << io::format_double(fleiss_kappa(table, n)) << "\n";
}

} // namespace

void register_pipeline_commands(CLI::App& root, std::vector<Command>& out)
{
  {
    auto o = std::make_shared<IngestOptions>();
    auto* c = root.add_subcommand("ingest", "Parse transcripts from a manifest and apply the words-per-second filter");
    c->add_option("--manifest", o->manifest, "Manifest JSON-lines")->required()->check(CLI::ExistingFile);
    c->add_option("--out", o->out, "Kept transcripts (JSON-lines)")->required();
    c->add_option("--dropped", o->dropped, "Dropped videos with their rates");
    c->add_option("--min-rate", o->min_rate, "Minimum words per second (kept when equal)")->capture_default_str();
    c->add_option("--jobs", o->jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    out.push_back({c, [o] { run_ingest(*o); }});
  }
  {
    auto o = std::make_shared<ExtractOptions>();
    auto* c = root.add_subcommand("extract", "Extract candidate verb-phrase actions");
    c->add_option("--transcripts", o->transcripts, "Transcripts from ingest")->check(CLI::ExistingFile);
    c->add_option("--vtt", o->vtt, "A single WebVTT file instead of --transcripts")->check(CLI::ExistingFile);
    c->add_option("--video-id", o->video_id, "Video id for --vtt")->capture_default_str();
    c->add_option("--duration", o->duration, "Video duration for --vtt (0 = unknown)")->capture_default_str();
    c->add_option("--tag-lexicon", o->tag_lexicon, "word<TAB>tag lexicon")->check(CLI::ExistingFile);
    c->add_option("--pos-dir", o->pos_dir, "Directory of <video_id>.pos sidecars")->check(CLI::ExistingDirectory);
    c->add_option("--rules", o->rules, "Chunk rules file")->check(CLI::ExistingFile);
    c->add_option("--out", o->out, "Actions JSON-lines")->required();
    out.push_back({c, [o] { run_extract(*o); }});
  }
  {
    auto o = std::make_shared<SegmentOptions>();
    auto* c = root.add_subcommand("segment", "Group timed actions into padded miniclips");
    c->add_option("--transcripts", o->transcripts, "Transcripts from ingest (durations)")->required()->check(CLI::ExistingFile);
    c->add_option("--actions", o->actions, "Actions from extract")->required()->check(CLI::ExistingFile);
    c->add_option("--out", o->out, "Miniclips JSON-lines")->required();
    c->add_option("--max-core", o->max_core, "Longest core span in seconds")->capture_default_str();
    c->add_option("--pad", o->pad, "Padding on each side in seconds")->capture_default_str();
    c->add_option("--jobs", o->jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    out.push_back({c, [o] { run_segment(*o); }});
  }
  {
    auto o = std::make_shared<MotionOptions>();
    auto* c = root.add_subcommand("motion-filter", "Drop static miniclips by frame correlation");
    c->add_option("--miniclips", o->miniclips, "Miniclips from segment")->required()->check(CLI::ExistingFile);
    c->add_option("--manifest", o->manifest, "Manifest (frames_dir, fps)")->required()->check(CLI::ExistingFile);
    c->add_option("--out", o->out, "Kept miniclips")->required();
    c->add_option("--dropped", o->dropped, "Dropped miniclips with reasons");
    c->add_option("--scores", o->scores, "Per-miniclip motion scores");
    c->add_option("--threshold", o->threshold, "Drop when score exceeds this")->capture_default_str();
    c->add_option("--stride", o->stride, "Frame sampling stride")->capture_default_str();
    c->add_option("--jobs", o->jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    out.push_back({c, [o] { run_motion_filter(*o); }});
  }
  {
    auto o = std::make_shared<HitsOptions>();
    auto* c = root.add_subcommand("hits", "Compose annotation HITs");
    c->add_option("--miniclips", o->miniclips, "Miniclips to annotate")->required()->check(CLI::ExistingFile);
    c->add_option("--gt-labels", o->gt_labels, "Expert labels for ground-truth miniclips")->required()->check(CLI::ExistingFile);
    c->add_option("--out", o->out, "HITs JSON-lines")->required();
    c->add_option("--seed", o->seed, "Root seed")->capture_default_str();
    c->add_option("--per-hit", o->per_hit, "Miniclips per HIT")->capture_default_str();
    c->add_option("--max-actions", o->max_actions, "Actions per miniclip")->capture_default_str();
    out.push_back({c, [o] { run_hits(*o); }});
  }
  {
    auto o = std::make_shared<ServeOptions>();
    auto* c = root.add_subcommand("serve", "Run the annotation HTTP API");
    c->add_option("--hits", o->hits, "HITs from the hits command")->required()->check(CLI::ExistingFile);
    c->add_option("--gt-labels", o->gt_labels, "Expert labels for ground-truth miniclips")->required()->check(CLI::ExistingFile);
    c->add_option("--log", o->log, "Append-only annotation log (replayed on start)");
    c->add_option("--actions", o->actions, "Actions (display text)")->check(CLI::ExistingFile);
    c->add_option("--miniclips", o->miniclips, "Miniclips (frame thumbnails)")->check(CLI::ExistingFile);
    c->add_option("--manifest", o->manifest, "Manifest (frame directories)")->check(CLI::ExistingFile);
    c->add_option("--host", o->host, "Bind address")->capture_default_str();
    c->add_option("--port", o->port, "Port")->capture_default_str();
    c->add_option("--static", o->static_dir, "Directory served at /")->check(CLI::ExistingDirectory);
    c->add_option("--annotators", o->annotators, "Accepted submissions per HIT")->capture_default_str();
    out.push_back({c, [o] { run_serve(*o); }});
  }
  {
    auto o = std::make_shared<AggregateOptions>();
    auto* c = root.add_subcommand("aggregate", "Majority-vote accepted annotations");
    c->add_option("--records", o->records, "Annotation log")->required()->check(CLI::ExistingFile);
    c->add_option("--out", o->out, "Aggregated labels")->required();
    c->add_option("--raters", o->raters, "Annotations per item")->capture_default_str();
    out.push_back({c, [o] { run_aggregate(*o); }});
  }
  {
    auto o = std::make_shared<KappaOptions>();
    auto* c = root.add_subcommand("kappa", "Fleiss' kappa over annotations or a count table");
    auto* rec = c->add_option("--records", o->records, "Annotation log")->check(CLI::ExistingFile);
    auto* cnt = c->add_option("--counts", o->counts, "Whitespace/TSV table of per-category counts")->check(CLI::ExistingFile);
    rec->excludes(cnt);
    c->add_option("--raters", o->raters, "Raters per item")->capture_default_str();
    out.push_back({c, [o] { run_kappa(*o); }});
  }
}

} // namespace vlogvis::cli
