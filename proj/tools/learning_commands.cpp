#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "commands.hpp"
#include "vlogvis/classifiers.hpp"
#include "vlogvis/evaluation.hpp"
#include "vlogvis/feature_bank.hpp"
#include "vlogvis/neural.hpp"
#include "vlogvis/rng.hpp"

namespace vlogvis::cli {

namespace {

int as_int(BinaryLabel l) { return l == BinaryLabel::Visible ? 1 : 0; }

std::string video_of_miniclip(const std::string& miniclip_id)
{
  const auto cut = miniclip_id.rfind('_');
  return cut == std::string::npos ? miniclip_id : miniclip_id.substr(0, cut);
}

// ---- features ---------------------------------------------------------------------

struct FeaturesOptions {
  std::string actions, embeddings, pos_embeddings, concreteness, contextual, out;
  std::size_t window = 5;
};

void run_features(const FeaturesOptions& o)
{
  auto actions = load_actions(o.actions);
  std::stable_sort(actions.begin(), actions.end(), [](const ActionRecord& a, const ActionRecord& b) {
    return a.video_id != b.video_id ? a.video_id < b.video_id : a.action_id < b.action_id;
  });
  const auto glove = load_embedding_table(o.embeddings);
  std::optional<EmbeddingTable> pos_table;
  if (!o.pos_embeddings.empty()) pos_table = load_embedding_table(o.pos_embeddings);
  std::optional<ConcretenessLexicon> lexicon;
  if (!o.concreteness.empty()) lexicon = load_concreteness(o.concreteness);
  std::map<std::string, Vector> contextual;
  if (!o.contextual.empty())
    for (const auto& row : io::read_jsonl(o.contextual))
      contextual[io::field<std::string>(row, "action_id")] = vector_from_json(io::field<json>(row, "vector"));

  std::vector<json> rows;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto& a = actions[i];
    const auto* prev = i > 0 && actions[i - 1].video_id == a.video_id ? &actions[i - 1].tokens : nullptr;
    const auto* next = i + 1 < actions.size() && actions[i + 1].video_id == a.video_id ? &actions[i + 1].tokens : nullptr;
    FeatureRecord r;
    r.action_id = a.action_id;
    r.video_id = a.video_id;
    r.tokens = a.tokens;
    r.tags = a.tags;
    auto& f = r.features;
    if (const auto it = contextual.find(a.action_id); it != contextual.end()) {
      f.action_emb = it->second;
    } else {
      if (!contextual.empty()) fail(ErrorCode::Parse, "no contextual vector for " + a.action_id);
      const auto pooled = action_embedding(a.tokens, glove);
      f.action_emb = pooled.value;
      r.oov = pooled.oov;
    }
    f.pos_emb = pos_table ? pos_embedding(a.tags, *pos_table).value : Vector();
    const auto ctx = context_features(a.sentence, a.span_start, a.span_end, prev, next, glove, o.window);
    f.context_s = {ctx.sentence_before, ctx.sentence_after};
    f.context_a = {ctx.action_prev, ctx.action_next};
    if (lexicon) f.concreteness = concreteness_score(a.tokens, a.tags, *lexicon);
    rows.push_back(to_json(r));
  }
  io::write_jsonl(o.out, rows);
  std::cout << "wrote features for " << rows.size() << " actions\n";
}

// ---- train ------------------------------------------------------------------------

struct TrainOptions {
  std::string model, features, labels, manifest, channel_order, out, predictions, eval_out, log, extras;
  std::size_t n_train = 8, n_val = 1;
  std::uint64_t seed = 0;
  // neural
  std::string feature_bank, embeddings, fc = "32,16";
  std::size_t epochs = 10, batch_size = 32, hidden = 16;
  double dropout = 0.5, lr = 1e-3, rho = 0.9, eps = 1e-8, positive_weight = 1.0;
  std::string grid_epochs, grid_batch, grid_hidden, grid_fc;
  // object matching
  std::string detections, taxonomy, similarity = "wup";
  double min_confidence = 0.0;
  // linear
  std::string c_grid = "0.01,0.1,1,10,100";
  std::size_t folds = 5, linear_epochs = 20;
};

struct Item {
  std::string miniclip_id, action_id, video_id;
  int label = 0;
  const FeatureRecord* f = nullptr;
};

struct Outputs {
  std::string method, input_features;
  std::vector<json> predictions;
  std::vector<int> predicted, gold;

  void add(const Item& it, std::optional<double> score, bool visible)
  {
    predictions.push_back({{"method", method},
                           {"input_features", input_features},
                           {"miniclip_id", it.miniclip_id},
                           {"action_id", it.action_id},
                           {"score", score ? json(*score) : json(nullptr)},
                           {"visible", visible}});
    predicted.push_back(visible ? 1 : 0);
    gold.push_back(it.label);
  }
};

std::string extras_label(const std::set<nn::Extra>& extras)
{
  std::string s;
  for (auto e : extras) {
    switch (e) {
      case nn::Extra::Pos: s += ", POS"; break;
      case nn::Extra::ContextS: s += ", ContextS"; break;
      case nn::Extra::ContextA: s += ", ContextA"; break;
      case nn::Extra::Concreteness: s += ", Concreteness"; break;
    }
  }
  return s;
}

nn::FusionSpec fusion_spec(const std::vector<Item>& items, nn::Modality modality, const std::set<nn::Extra>& extras)
{
  if (items.empty()) fail(ErrorCode::EmptyDataset, "no labeled items");
  const auto& f = items.front().f->features;
  nn::FusionSpec spec;
  spec.modality = modality;
  spec.text_dim = static_cast<std::size_t>(f.action_emb.size());
  spec.pos_dim = static_cast<std::size_t>(f.pos_emb.size());
  spec.context_dim = static_cast<std::size_t>(f.context_s.first.size());
  spec.extras = extras;
  if (extras.contains(nn::Extra::Pos) && spec.pos_dim == 0) fail(ErrorCode::Config, "pos extra requested but features have no pos vectors");
  if (extras.contains(nn::Extra::Concreteness)) {
    const bool any = std::any_of(items.begin(), items.end(), [](const Item& it) { return it.f->features.concreteness.has_value(); });
    if (!any) fail(ErrorCode::Config, "concreteness extra requested but no feature record carries a score");
  }
  return spec;
}

nn::TrainConfig train_config(const TrainOptions& o)
{
  nn::TrainConfig c;
  c.learning_rate = o.lr;
  c.rho = o.rho;
  c.epsilon = o.eps;
  c.epochs = o.epochs;
  c.batch_size = o.batch_size;
  c.seed = stage_seed(o.seed, "train");
  c.hidden_dim = o.hidden;
  c.fc_sizes = csv_numbers<std::size_t>(o.fc);
  c.dropout = o.dropout;
  c.positive_weight = o.positive_weight;
  return c;
}

std::vector<std::vector<std::size_t>> fc_grid(const std::string& s)
{
  std::vector<std::vector<std::size_t>> out;
  for (const auto& group : csv_list(s)) {
    std::vector<std::size_t> sizes;
    for (const auto& part : text::split(group, '-')) sizes.push_back(csv_numbers<std::size_t>(part).at(0));
    out.push_back(sizes);
  }
  return out;
}

void write_outputs(const TrainOptions& o, const Outputs& out)
{
  if (!o.predictions.empty()) io::write_jsonl(o.predictions, out.predictions);
  if (out.gold.empty()) {
    std::cout << out.method << ": no test items\n";
    return;
  }
  const auto m = metrics(out.predicted, out.gold);
  const std::vector<ResultRow> rows{{out.method, out.input_features, m}};
  if (!o.eval_out.empty()) io::write_file_atomic(o.eval_out, results_csv(rows));
  std::cout << out.method << " [" << out.input_features << "] test accuracy " << io::format_double(m.accuracy) << " f1 "
            << io::format_double(m.f1) << " (" << out.gold.size() << " items)\n";
}

std::vector<int> labels_of(const std::vector<Item>& items)
{
  std::vector<int> y;
  for (const auto& it : items) y.push_back(it.label);
  return y;
}

void train_threshold_like(const TrainOptions& o, const ChannelSplit<Item>& split, Outputs& out,
                          const std::function<std::optional<double>(const Item&)>& score, const std::vector<double>& grid,
                          const std::string& score_name)
{
  std::vector<std::optional<double>> val_scores;
  for (const auto& it : split.validation) val_scores.push_back(score(it));
  const auto y = labels_of(split.validation);
  const auto model = tune_threshold(val_scores, y, grid);
  auto j = to_json(model);
  j["score"] = score_name;
  if (!o.out.empty()) io::write_file_atomic(o.out, j.dump(2) + "\n");
  for (const auto& it : split.test) {
    const auto s = score(it);
    out.add(it, s, predict(model, s).visible);
  }
}

void run_train(const TrainOptions& o)
{
  const auto features = load_features(o.features);
  const auto manifest = load_manifest(o.manifest);
  std::map<std::string, std::string> channel_of;
  for (const auto& m : manifest) channel_of[m.video_id] = m.channel;

  std::vector<Item> items;
  for (const auto& l : load_labels(o.labels)) {
    const auto f = features.find(l.action_id);
    if (f == features.end()) fail(ErrorCode::Parse, "no feature record for labeled action " + l.action_id);
    items.push_back({l.miniclip_id, l.action_id, f->second.video_id, as_int(l.label), &f->second});
  }
  const auto split = split_by_channel(
      items,
      [&](const Item& it) -> const std::string& {
        const auto c = channel_of.find(it.video_id);
        if (c == channel_of.end()) fail(ErrorCode::UnknownChannel, "video " + it.video_id + " is not in the manifest");
        return c->second;
      },
      channel_order(manifest, o.channel_order), o.n_train, o.n_val);
  if (split.train.empty()) fail(ErrorCode::EmptyDataset, "training split is empty");

  const auto extras = nn::parse_extras(o.extras);
  Outputs out;
  const std::string& kind = o.model;

  if (kind == "majority") {
    out.method = "Majority";
    out.input_features = "Action";
    const auto base = majority_baseline(labels_of(split.train));
    if (!o.out.empty()) io::write_file_atomic(o.out, json{{"kind", "majority"}, {"label", base.label}}.dump(2) + "\n");
    for (const auto& it : split.test) out.add(it, std::nullopt, base.predict() == 1);
  } else if (kind == "threshold") {
    out.method = "Threshold";
    out.input_features = "Concreteness";
    train_threshold_like(o, split, out, [](const Item& it) { return it.f->features.concreteness; }, concreteness_grid(), "concreteness");
  } else if (kind == "yolo") {
    out.method = "Threshold";
    out.input_features = o.similarity == "cosine" ? "Object similarity (cosine)" : "Object similarity (WUP)";
    if (o.detections.empty()) fail(ErrorCode::Config, "yolo needs --detections");
    const auto detections = load_detections(o.detections, o.min_confidence);
    std::optional<Taxonomy> tax;
    std::optional<EmbeddingTable> emb;
    SimilarityMode mode;
    if (o.similarity == "wup") {
      if (o.taxonomy.empty()) fail(ErrorCode::Config, "WUP matching needs --taxonomy");
      tax = load_taxonomy(o.taxonomy);
      mode = SimilarityMode::Wup;
    } else if (o.similarity == "cosine") {
      if (o.embeddings.empty()) fail(ErrorCode::Config, "cosine matching needs --embeddings");
      emb = load_embedding_table(o.embeddings);
      mode = SimilarityMode::Cosine;
    } else {
      fail(ErrorCode::Config, "--similarity must be wup or cosine");
    }
    auto score = [&](const Item& it) -> std::optional<double> {
      std::set<std::string> labels;
      if (const auto d = detections.find(it.miniclip_id); d != detections.end())
        for (const auto& det : d->second) labels.insert(det.label);
      const std::vector<std::string> nouns = it.f->nouns();
      const std::vector<std::string> objs(labels.begin(), labels.end());
      return object_match_score(nouns, objs, mode, tax ? &*tax : nullptr, emb ? &*emb : nullptr);
    };
    train_threshold_like(o, split, out, score, similarity_grid(), "object_similarity");
  } else if (kind == "linear") {
    out.method = "SVM";
    out.input_features = "Action" + extras_label(extras);
    const auto spec = fusion_spec(split.train, nn::Modality::TextOnly, extras);
    // cross-validation runs over train and validation together
    std::vector<Item> pool = split.train;
    pool.insert(pool.end(), split.validation.begin(), split.validation.end());
    std::vector<Vector> X;
    for (const auto& it : pool) X.push_back(nn::text_input(it.f->features, spec));
    LinearTrainOptions lo;
    lo.C_grid = csv_numbers<double>(o.c_grid);
    lo.folds = o.folds;
    lo.epochs = o.linear_epochs;
    lo.seed = stage_seed(o.seed, "linear");
    const auto y = labels_of(pool);
    const auto trained = train_linear(X, y, lo);
    if (!o.out.empty()) io::write_file_atomic(o.out, to_json(trained.model).dump(2) + "\n");
    for (const auto& it : split.test) {
      const auto d = predict(trained.model, nn::text_input(it.f->features, spec));
      out.add(it, d.margin, d.visible);
    }
  } else if (kind == "lstm") {
    out.method = "LSTM";
    out.input_features = "Action";
    if (o.embeddings.empty()) fail(ErrorCode::Config, "lstm needs --embeddings");
    const auto glove = load_embedding_table(o.embeddings);
    const auto cfg = train_config(o);
    std::vector<std::vector<std::string>> vocab_source;
    std::size_t max_len = 0;
    for (const auto& it : split.train) vocab_source.push_back(it.f->tokens);
    for (const auto& it : items) max_len = std::max(max_len, it.f->tokens.size());
    auto model = nn::TextModel::create(vocab_source, glove, cfg);
    auto encode = [&](const std::vector<Item>& src) {
      std::vector<nn::TextItem> dst;
      for (const auto& it : src) dst.push_back({model.encode(it.f->tokens, max_len), it.label, it.action_id});
      return dst;
    };
    const auto tr = encode(split.train), va = encode(split.validation), te = encode(split.test);
    const auto log = nn::train(model, std::span<const nn::TextItem>(tr), cfg, std::span<const nn::TextItem>(va));
    if (!o.log.empty()) io::write_file_atomic(o.log, nn::training_log_csv(log));
    if (!o.out.empty()) nn::save_checkpoint(o.out, model, cfg.seed);
    for (std::size_t i = 0; i < te.size(); ++i) {
      const double p = model.predict(te[i]);
      out.add(split.test[i], p, p >= 0.5);
    }
  } else if (kind == "multimodal" || kind == "text" || kind == "video") {
    const auto modality = kind == "multimodal" ? nn::Modality::Multimodal : kind == "text" ? nn::Modality::TextOnly : nn::Modality::VideoOnly;
    out.method = kind == "multimodal" ? "Multimodal" : kind == "text" ? "Fusion text-only" : "Fusion video-only";
    out.input_features = modality == nn::Modality::VideoOnly ? "Video" : "Action" + extras_label(extras);
    if (modality == nn::Modality::Multimodal) out.input_features += ", Video";
    auto spec = fusion_spec(split.train, modality, extras);
    std::map<std::string, std::shared_ptr<const FeatureRows>> video;
    if (spec.uses_video()) {
      if (o.feature_bank.empty()) fail(ErrorCode::MissingFeatureBank, "video modality needs --feature-bank");
      VideoFeatureBank bank(o.feature_bank);
      for (const auto& it : items) {
        if (video.contains(it.miniclip_id)) continue;
        const auto* rows = bank.find(it.miniclip_id);
        video[it.miniclip_id] = rows ? std::make_shared<const FeatureRows>(*rows) : nullptr;
      }
      const auto dims = bank.dims();
      if (!dims) fail(ErrorCode::MissingFeatureBank, "feature bank " + o.feature_bank + " has no files for the labeled miniclips");
      spec.video_dim = static_cast<std::size_t>(dims->first) + dims->second;
    }
    auto convert = [&](const std::vector<Item>& src) {
      std::vector<nn::MultimodalItem> dst;
      for (const auto& it : src) {
        nn::MultimodalItem m{it.action_id, it.miniclip_id, it.f->features, nullptr, it.label};
        if (spec.uses_video()) m.video = video[it.miniclip_id];
        dst.push_back(std::move(m));
      }
      return dst;
    };
    const auto tr = convert(split.train), va = convert(split.validation), te = convert(split.test);
    auto cfg = train_config(o);
    if (!o.grid_epochs.empty() || !o.grid_batch.empty() || !o.grid_hidden.empty() || !o.grid_fc.empty()) {
      nn::HyperGrid grid;
      if (!o.grid_epochs.empty()) grid.epochs = csv_numbers<std::size_t>(o.grid_epochs);
      else grid.epochs = {cfg.epochs};
      if (!o.grid_batch.empty()) grid.batch_sizes = csv_numbers<std::size_t>(o.grid_batch);
      else grid.batch_sizes = {cfg.batch_size};
      if (!o.grid_hidden.empty()) grid.hidden_dims = csv_numbers<std::size_t>(o.grid_hidden);
      else grid.hidden_dims = {cfg.hidden_dim};
      if (!o.grid_fc.empty()) grid.fc_sizes = fc_grid(o.grid_fc);
      else grid.fc_sizes = {cfg.fc_sizes};
      const auto best = nn::grid_search(tr, va, spec, cfg, grid);
      cfg = best.best;
      std::cout << "grid search: best validation accuracy " << io::format_double(best.best_val_accuracy) << " over "
                << best.trials.size() << " configurations\n";
    }
    std::vector<nn::EpochLog> log;
    const auto model = nn::train_multimodal(tr, spec, cfg, va, &log);
    if (!o.log.empty()) io::write_file_atomic(o.log, nn::training_log_csv(log));
    if (!o.out.empty()) {
      auto copy = model;
      nn::save_checkpoint(o.out, copy, cfg.seed);
    }
    for (std::size_t i = 0; i < te.size(); ++i) {
      const auto p = nn::predict_visibility(model, te[i]);
      out.add(split.test[i], p.p_visible, p.visible());
    }
  } else {
    fail(ErrorCode::Config, "unknown model '" + kind + "'");
  }
  write_outputs(o, out);
}

// ---- evaluate ---------------------------------------------------------------------

struct EvaluateOptions {
  std::vector<std::string> predictions;
  std::string labels, out, ttest;
};

void run_evaluate(const EvaluateOptions& o)
{
  std::map<ItemKey, int> gold;
  for (const auto& l : load_labels(o.labels)) gold[{l.miniclip_id, l.action_id}] = as_int(l.label);

  struct System {
    std::string method, input_features;
    std::map<ItemKey, int> predicted;
  };
  std::vector<System> systems;
  for (const auto& path : o.predictions) {
    System s;
    for (const auto& row : io::read_jsonl(path)) {
      s.method = io::field_or<std::string>(row, "method", fs::path(path).stem().string());
      s.input_features = io::field_or<std::string>(row, "input_features", "");
      ItemKey key{io::field<std::string>(row, "miniclip_id"), io::field<std::string>(row, "action_id")};
      if (!gold.contains(key)) fail(ErrorCode::LengthMismatch, "prediction for unlabeled item " + key.first + "/" + key.second);
      s.predicted[key] = io::field<bool>(row, "visible") ? 1 : 0;
    }
    if (s.predicted.empty()) fail(ErrorCode::LengthMismatch, path + " has no predictions");
    systems.push_back(std::move(s));
  }

  std::vector<ResultRow> rows;
  for (const auto& s : systems) {
    std::vector<int> p, g;
    for (const auto& [key, v] : s.predicted) {
      p.push_back(v);
      g.push_back(gold.at(key));
    }
    rows.push_back({s.method, s.input_features, metrics(p, g)});
  }
  const auto csv = results_csv(rows);
  if (!o.out.empty()) io::write_file_atomic(o.out, csv);
  std::cout << csv;

  if (!o.ttest.empty()) {
    std::string t = "method_a,method_b,n,t,dof,p_two_tailed,infinite_t\n";
    const auto& base = systems.front();
    for (std::size_t k = 1; k < systems.size(); ++k) {
      const auto& other = systems[k];
      if (other.predicted.size() != base.predicted.size())
        fail(ErrorCode::LengthMismatch, "systems were evaluated on different item sets");
      std::vector<int> pa, pb, g;
      for (const auto& [key, v] : other.predicted) {
        const auto b = base.predicted.find(key);
        if (b == base.predicted.end()) fail(ErrorCode::LengthMismatch, "systems were evaluated on different item sets");
        pa.push_back(v);
        pb.push_back(b->second);
        g.push_back(gold.at(key));
      }
      const auto r = paired_ttest(correctness(pa, g), correctness(pb, g));
      t += other.method + "," + base.method + "," + std::to_string(g.size()) + "," + io::format_double(r.t_statistic) + "," +
           std::to_string(r.dof) + "," + io::format_double(r.p_two_tailed) + "," + (r.infinite_t ? "true" : "false") + "\n";
    }
    io::write_file_atomic(o.ttest, t);
  }
}

// ---- stats --------------------------------------------------------------------------

struct StatsOptions {
  std::string transcripts, labels, manifest, channel_order, actions, out_md, out_csv, ambiguous;
  std::size_t n_train = 8, n_val = 1;
};

void run_stats(const StatsOptions& o)
{
  std::vector<VideoSummary> videos;
  if (!o.transcripts.empty())
    for (const auto& t : load_transcripts(o.transcripts)) videos.push_back({t.video_id, t.duration_s, word_count(t)});
  std::vector<AggregatedLabel> labels;
  if (!o.labels.empty()) labels = load_labels(o.labels);

  std::map<std::string, std::string> split_of;
  if (!o.manifest.empty()) {
    const auto manifest = load_manifest(o.manifest);
    const auto order = channel_order(manifest, o.channel_order);
    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
    std::map<std::string, std::string> channel;
    for (const auto& m : manifest) channel[m.video_id] = m.channel;
    for (const auto& l : labels) {
      const auto c = channel.find(video_of_miniclip(l.miniclip_id));
      if (c == channel.end() || !rank.contains(c->second)) continue;
      const auto r = rank[c->second];
      split_of[l.miniclip_id] = r < o.n_train ? "train" : r < o.n_train + o.n_val ? "val" : "test";
    }
  }
  const auto s = dataset_stats(videos, labels, split_of);
  const auto md = stats_markdown(s);
  if (!o.out_md.empty()) io::write_file_atomic(o.out_md, md);
  if (!o.out_csv.empty()) io::write_file_atomic(o.out_csv, stats_csv(s));
  std::cout << md;
  if (!o.actions.empty()) {
    std::map<std::string, std::string> text_of;
    for (const auto& a : load_actions(o.actions)) text_of[a.action_id] = a.text();
    const auto amb = ambiguous_actions(labels, text_of);
    std::cout << "ambiguous actions: " << amb.size() << "\n";
    if (!o.ambiguous.empty()) {
      std::string body;
      for (const auto& a : amb) body += a + "\n";
      io::write_file_atomic(o.ambiguous, body);
    }
  }
}

} // namespace

void register_learning_commands(CLI::App& root, std::vector<Command>& out)
{
  {
    auto o = std::make_shared<FeaturesOptions>();
    auto* c = root.add_subcommand("features", "Compute per-action text features");
    c->add_option("--actions", o->actions, "Actions from extract")->required()->check(CLI::ExistingFile);
    c->add_option("--embeddings", o->embeddings, "Word embedding table (word v1 ... vD)")->required()->check(CLI::ExistingFile);
    c->add_option("--pos-embeddings", o->pos_embeddings, "POS tag embedding table")->check(CLI::ExistingFile);
    c->add_option("--concreteness", o->concreteness, "word<TAB>score lexicon")->check(CLI::ExistingFile);
    c->add_option("--contextual", o->contextual, "Precomputed action vectors {action_id, vector}")->check(CLI::ExistingFile);
    c->add_option("--window", o->window, "Sentence context words on each side")->capture_default_str();
    c->add_option("--out", o->out, "Feature records JSON-lines")->required();
    out.push_back({c, [o] { run_features(*o); }});
  }
  {
    auto o = std::make_shared<TrainOptions>();
    auto* c = root.add_subcommand("train", "Train a visibility classifier and predict on the test split");
    c->add_option("--model", o->model, "majority|threshold|yolo|linear|lstm|multimodal|text|video")
        ->required()
        ->check(CLI::IsMember({"majority", "threshold", "yolo", "linear", "lstm", "multimodal", "text", "video"}));
    c->add_option("--features", o->features, "Feature records")->required()->check(CLI::ExistingFile);
    c->add_option("--labels", o->labels, "Aggregated labels")->required()->check(CLI::ExistingFile);
    c->add_option("--manifest", o->manifest, "Manifest (channels for the split)")->required()->check(CLI::ExistingFile);
    c->add_option("--channel-order", o->channel_order, "Comma-separated channel order (default: sorted)");
    c->add_option("--n-train", o->n_train, "Channels in the training split")->capture_default_str();
    c->add_option("--n-val", o->n_val, "Channels in the validation split")->capture_default_str();
    c->add_option("--out", o->out, "Model file (JSON or VNF1 checkpoint)");
    c->add_option("--predictions", o->predictions, "Test predictions JSON-lines");
    c->add_option("--eval-out", o->eval_out, "Test metrics CSV");
    c->add_option("--log", o->log, "Training log CSV (neural models)");
    c->add_option("--extras", o->extras, "Comma list of pos,context_s,context_a,concreteness");
    c->add_option("--seed", o->seed, "Root seed")->capture_default_str();
    c->add_option("--feature-bank", o->feature_bank, "Directory of <miniclip_id>.vfb files")->check(CLI::ExistingDirectory);
    c->add_option("--embeddings", o->embeddings, "Embedding table (lstm, cosine matching)")->check(CLI::ExistingFile);
    c->add_option("--epochs", o->epochs, "Training epochs")->capture_default_str();
    c->add_option("--batch-size", o->batch_size, "Mini-batch size")->capture_default_str();
    c->add_option("--hidden", o->hidden, "LSTM hidden size")->capture_default_str();
    c->add_option("--fc", o->fc, "Comma list of hidden layer sizes")->capture_default_str();
    c->add_option("--dropout", o->dropout, "Dropout rate")->capture_default_str();
    c->add_option("--lr", o->lr, "RMSprop learning rate")->capture_default_str();
    c->add_option("--rho", o->rho, "RMSprop decay")->capture_default_str();
    c->add_option("--eps", o->eps, "RMSprop epsilon")->capture_default_str();
    c->add_option("--positive-weight", o->positive_weight, "BCE weight on Visible items")->capture_default_str();
    c->add_option("--grid-epochs", o->grid_epochs, "Grid search: epochs list");
    c->add_option("--grid-batch", o->grid_batch, "Grid search: batch size list");
    c->add_option("--grid-hidden", o->grid_hidden, "Grid search: hidden size list");
    c->add_option("--grid-fc", o->grid_fc, "Grid search: layer lists, e.g. 32-16,64-32");
    c->add_option("--detections", o->detections, "Object detections JSON-lines")->check(CLI::ExistingFile);
    c->add_option("--taxonomy", o->taxonomy, "child<TAB>parent taxonomy")->check(CLI::ExistingFile);
    c->add_option("--similarity", o->similarity, "wup|cosine")->capture_default_str();
    c->add_option("--min-confidence", o->min_confidence, "Detection confidence cut")->capture_default_str();
    c->add_option("--C-grid", o->c_grid, "Linear model C values")->capture_default_str();
    c->add_option("--folds", o->folds, "Cross-validation folds")->capture_default_str();
    c->add_option("--linear-epochs", o->linear_epochs, "Passes of the linear solver")->capture_default_str();
    out.push_back({c, [o] { run_train(*o); }});
  }
  {
    auto o = std::make_shared<EvaluateOptions>();
    auto* c = root.add_subcommand("evaluate", "Metrics table and paired t-tests over prediction files");
    c->add_option("--predictions", o->predictions, "Prediction files; the first is the t-test reference")
        ->required()
        ->check(CLI::ExistingFile);
    c->add_option("--labels", o->labels, "Aggregated labels")->required()->check(CLI::ExistingFile);
    c->add_option("--out", o->out, "Results CSV");
    c->add_option("--ttest", o->ttest, "Paired t-test CSV against the first system");
    out.push_back({c, [o] { run_evaluate(*o); }});
  }
  {
    auto o = std::make_shared<StatsOptions>();
    auto* c = root.add_subcommand("stats", "Corpus statistics report");
    c->add_option("--transcripts", o->transcripts, "Transcripts from ingest")->check(CLI::ExistingFile);
    c->add_option("--labels", o->labels, "Aggregated labels")->check(CLI::ExistingFile);
    c->add_option("--manifest", o->manifest, "Manifest (per-split counts)")->check(CLI::ExistingFile);
    c->add_option("--channel-order", o->channel_order, "Comma-separated channel order");
    c->add_option("--n-train", o->n_train, "Channels in the training split")->capture_default_str();
    c->add_option("--n-val", o->n_val, "Channels in the validation split")->capture_default_str();
    c->add_option("--actions", o->actions, "Actions (enables the ambiguous-action count)")->check(CLI::ExistingFile);
    c->add_option("--ambiguous", o->ambiguous, "Write ambiguous action strings here");
    c->add_option("--out-md", o->out_md, "Markdown report");
    c->add_option("--out-csv", o->out_csv, "CSV report");
    out.push_back({c, [o] { run_stats(*o); }});
  }
}

} // namespace vlogvis::cli
