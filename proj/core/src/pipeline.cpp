#include "seqlink/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "seqlink/candgen.hpp"
#include "seqlink/checkpoint.hpp"
#include "seqlink/episode_data.hpp"
#include "seqlink/errors.hpp"
#include "seqlink/eval.hpp"
#include "seqlink/global_encoder.hpp"
#include "seqlink/local_encoder.hpp"
#include "seqlink/selector.hpp"

namespace seqlink::pipeline {

using nlohmann::json;

Stage parse_stage(const std::string& name) {
  if (name == "build-kb") return Stage::kBuildKb;
  if (name == "gen-candidates") return Stage::kGenCandidates;
  if (name == "pretrain-local") return Stage::kPretrainLocal;
  if (name == "pretrain-global") return Stage::kPretrainGlobal;
  if (name == "train-rl") return Stage::kTrainRl;
  if (name == "link") return Stage::kLink;
  if (name == "eval") return Stage::kEval;
  if (name == "ablate") return Stage::kAblate;
  throw ConfigError("unknown stage: " + name);
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::kBuildKb: return "build-kb";
    case Stage::kGenCandidates: return "gen-candidates";
    case Stage::kPretrainLocal: return "pretrain-local";
    case Stage::kPretrainGlobal: return "pretrain-global";
    case Stage::kTrainRl: return "train-rl";
    case Stage::kLink: return "link";
    case Stage::kEval: return "eval";
    case Stage::kAblate: return "ablate";
  }
  throw ConfigError("unknown stage enum value");
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot hash missing file: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  auto data = buf.str();
  return fnv1a64(data.data(), data.size());
}

Split split_documents(const std::vector<corpus::Document>& docs, double train_fraction,
                      std::uint64_t seed) {
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);
  auto train_count = static_cast<std::size_t>(
      static_cast<double>(docs.size()) * train_fraction);
  train_count = std::min(train_count, docs.size());

  std::vector<std::size_t> train_idx(order.begin(), order.begin() + train_count);
  std::vector<std::size_t> heldout_idx(order.begin() + train_count, order.end());
  // Keep corpus file order within each side so artifacts stay stable.
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(heldout_idx.begin(), heldout_idx.end());

  Split split;
  for (auto i : train_idx) split.train.push_back(docs[i]);
  for (auto i : heldout_idx) split.heldout.push_back(docs[i]);
  return split;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::filesystem::path manifest_path(const std::filesystem::path& out, const std::string& stage) {
  return out / (stage + ".manifest.json");
}

void require_stage(const std::filesystem::path& out, const std::string& upstream,
                   std::uint64_t expected_hash) {
  auto path = manifest_path(out, upstream);
  if (!std::filesystem::exists(path))
    throw DependencyError("missing artifacts for stage '" + upstream + "'; run " + upstream +
                          " first");
  std::ifstream is(path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DependencyError("unreadable manifest for stage '" + upstream + "': " + e.what());
  }
  if (j.value("config_hash", std::string()) != hex64(expected_hash))
    throw DependencyError("config-hash mismatch with stage '" + upstream +
                          "'; re-run it with the current configuration");
}

void write_manifest(const RunConfig& config, const std::string& stage,
                    const std::map<std::string, std::string>& overrides,
                    const std::map<std::string, std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs) {
  json jin = json::object();
  for (const auto& [name, path] : inputs) jin[name] = hex64(file_hash(path));
  json jout = json::object();
  for (const auto& path : outputs) jout[path.filename().string()] = hex64(file_hash(path));
  json j{{"stage", stage},
         {"config_hash", hex64(config_hash(config))},
         {"seed", config.seed},
         {"inputs", jin},
         {"outputs", jout},
         {"config", json::parse(config_to_json(config))},
         {"overrides", overrides}};
  std::ofstream os(manifest_path(config.out_dir, stage));
  if (!os) throw ValidationError("cannot write manifest for stage " + stage);
  os << j.dump(2) << '\n';
}

// Lazily loaded shared inputs; stages pull only what they need.
struct StageContext {
  const RunConfig& config;
  std::filesystem::path out;

  corpus::EmbeddingTable words{1};
  corpus::EmbeddingTable entity_embeddings{1};
  corpus::KnowledgeBase kb;
  std::vector<corpus::Document> docs;
  Split split;
  candgen::CandidateMap candsets;
  local_encoder::PsiTable psi;

  explicit StageContext(const RunConfig& cfg) : config(cfg), out(cfg.out_dir) {}

  void load_embeddings() {
    words = corpus::load_embeddings(config.word_embeddings_path, config.word_dim);
    entity_embeddings =
        corpus::load_embeddings(config.entity_embeddings_path, config.entity_dim);
  }
  void load_corpus() {
    docs = corpus::load_corpus(config.corpus_path);
    corpus::prepare_contexts(docs, config.context_window);
    split = split_documents(docs, config.train_fraction, config.seed);
  }
  void load_processed_kb() {
    kb = corpus::load_kb_processed(out / kKbArtifact, entity_embeddings);
  }
  void load_candidates() {
    candsets = candgen::load_candidates(out / kCandidatesArtifact, config.top_k);
  }
  void load_psi() { psi = local_encoder::load_psi(out / kPsiArtifact); }

  const std::vector<corpus::Document>& eval_docs() const {
    if (config.eval_split == "train") return split.train;
    if (config.eval_split == "all") return docs;
    return split.heldout;
  }

  local_encoder::LocalDims local_dims() const {
    return {config.word_dim, config.local_hidden, config.entity_dim, config.local_mlp_hidden};
  }

  local_encoder::LocalEncoder load_local() {
    neural::ParamStore store;
    neural::load_checkpoint(out / kLocalCheckpoint, store, config_hash(config));
    return local_encoder::LocalEncoder::attach(std::move(store), local_dims());
  }

  global_encoder::GlobalEncoder load_global(const char* artifact) {
    neural::ParamStore store;
    neural::load_checkpoint(out / artifact, store, config_hash(config));
    auto dims = local_dims();
    return global_encoder::GlobalEncoder::attach(std::move(store), dims.hidden,
                                                 dims.hidden + dims.entity_dim,
                                                 config.global_hidden);
  }

  selector::PolicyDims policy_dims() const {
    auto dims = local_dims();
    selector::PolicyDims p;
    p.mention_dim = dims.hidden;
    p.entity_vec_dim = dims.hidden + dims.entity_dim;
    p.feature_proj_dim = config.feature_dim;
    p.global_dim = config.global_hidden;
    p.hidden = config.policy_hidden;
    p.layers = config.policy_layers;
    return p;
  }

  neural::Vec rank_weights() const {
    neural::Vec w(candgen::kFeatureCount);
    for (int i = 0; i < candgen::kFeatureCount; ++i) w[i] = config.rank_weights[i];
    return w;
  }
};

void write_csv(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << content;
}

void stage_build_kb(StageContext& ctx) {
  ctx.load_embeddings();
  auto kb = corpus::load_kb(ctx.config.kb_path, ctx.config.keyword_budget,
                            ctx.entity_embeddings);
  corpus::save_kb_processed(ctx.out / kKbArtifact, kb);
  if (kb.missing_embedding_count > 0)
    std::cerr << "warning: " << kb.missing_embedding_count
              << " entities have no pretrained embedding\n";
  std::cout << "build-kb: " << kb.size() << " entities, " << kb.alias_index().size()
            << " alias keys\n";
}

void stage_gen_candidates(StageContext& ctx) {
  ctx.load_embeddings();
  ctx.load_corpus();
  ctx.load_processed_kb();
  ctx.candsets = candgen::generate_all(ctx.docs, ctx.kb, ctx.words, ctx.config.top_k,
                                       ctx.rank_weights());
  candgen::save_candidates(ctx.out / kCandidatesArtifact, ctx.candsets);

  bool any_gold = false;
  for (const auto& d : ctx.docs)
    for (const auto& m : d.mentions) any_gold |= m.gold_entity_id.has_value();
  if (any_gold) {
    std::string csv = "k,recall\n";
    char buf[64];
    for (int k = 1; k <= ctx.config.top_k; ++k) {
      double r = candgen::recall_at_k(ctx.docs, ctx.candsets, k);
      std::snprintf(buf, sizeof buf, "%d,%.6f\n", k, r);
      csv += buf;
      std::cout << "gen-candidates: recall@" << k << " = " << r << "\n";
    }
    write_csv(ctx.out / kRecallArtifact, csv);
  }
}

void stage_pretrain_local(StageContext& ctx) {
  ctx.load_embeddings();
  ctx.load_corpus();
  ctx.load_processed_kb();
  ctx.load_candidates();

  local_encoder::LocalEncoder encoder(ctx.local_dims(), ctx.config.seed);
  local_encoder::TrainOptions opts;
  opts.epochs = ctx.config.local_epochs;
  opts.batch_size = ctx.config.local_batch;
  opts.lr = ctx.config.learning_rate;
  opts.margin = ctx.config.margin;
  opts.keep_prob = ctx.config.keep_prob;
  opts.seed = ctx.config.seed;
  auto stats = encoder.train(ctx.split.train, ctx.candsets, ctx.kb, ctx.words, opts);

  std::string csv = "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < stats.epoch_losses.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", e, stats.epoch_losses[e]);
    csv += buf;
  }
  write_csv(ctx.out / kLocalLossArtifact, csv);

  neural::save_checkpoint(ctx.out / kLocalCheckpoint, encoder.params(),
                          config_hash(ctx.config));
  auto psi = local_encoder::score_all(encoder, ctx.docs, ctx.candsets, ctx.kb, ctx.words);
  local_encoder::save_psi(ctx.out / kPsiArtifact, psi);
  std::cout << "pretrain-local: " << stats.pair_count << " pairs, skipped "
            << stats.skipped_no_gold << " mentions without retrievable gold, final loss "
            << (stats.epoch_losses.empty() ? 0.0 : stats.epoch_losses.back()) << "\n";
}

void stage_pretrain_global(StageContext& ctx) {
  ctx.load_embeddings();
  ctx.load_corpus();
  ctx.load_processed_kb();
  ctx.load_candidates();
  ctx.load_psi();

  auto local = ctx.load_local();
  auto assets = build_assets(ctx.split.train, ctx.candsets, local, ctx.kb, ctx.words, ctx.psi,
                             ctx.config.sequence_length, ctx.config.rank_mentions);
  Rng rng = make_rng(ctx.config.seed, "pretrain-global/negatives");
  auto sequences = build_pretrain_sequences(assets, rng);

  global_encoder::GlobalEncoder genc(local.mention_dim(), local.entity_vec_dim(),
                                     ctx.config.global_hidden, ctx.config.seed);
  global_encoder::PretrainOptions opts;
  opts.epochs = ctx.config.global_epochs;
  opts.batch_size = ctx.config.global_batch;
  opts.lr = ctx.config.learning_rate;
  opts.keep_prob = ctx.config.keep_prob;
  opts.seed = ctx.config.seed;
  auto stats = genc.pretrain(sequences, opts);

  std::string csv = "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < stats.epoch_losses.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", e, stats.epoch_losses[e]);
    csv += buf;
  }
  write_csv(ctx.out / kGlobalLossArtifact, csv);
  neural::save_checkpoint(ctx.out / kGlobalCheckpoint, genc.params(),
                          config_hash(ctx.config));
  std::cout << "pretrain-global: " << sequences.size() << " sequences, final loss "
            << (stats.epoch_losses.empty() ? 0.0 : stats.epoch_losses.back()) << "\n";
}

void stage_train_rl(StageContext& ctx) {
  ctx.load_embeddings();
  ctx.load_corpus();
  ctx.load_processed_kb();
  ctx.load_candidates();
  ctx.load_psi();

  auto local = ctx.load_local();
  auto genc = ctx.load_global(kGlobalCheckpoint);
  selector::PolicyNetwork policy(ctx.policy_dims(), ctx.config.seed);

  auto assets = build_assets(ctx.split.train, ctx.candsets, local, ctx.kb, ctx.words, ctx.psi,
                             ctx.config.sequence_length, ctx.config.rank_mentions);
  selector::JointTrainOptions opts;
  opts.epochs = ctx.config.rl_epochs;
  opts.lr = ctx.config.learning_rate;
  opts.clip_norm = ctx.config.clip_norm;
  opts.mean_baseline = ctx.config.reward_baseline;
  opts.use_global_encoding = ctx.config.use_global_encoding;
  opts.seed = ctx.config.seed;
  auto report = selector::train_joint(assets, policy, genc, ctx.config.top_k, opts);

  std::string csv = "epoch,mean_reward,train_accuracy,wall_seconds\n";
  char buf[128];
  for (const auto& tel : report.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.3f\n", tel.epoch, tel.mean_reward,
                  tel.train_accuracy, tel.wall_seconds);
    csv += buf;
  }
  write_csv(ctx.out / kTelemetryArtifact, csv);
  neural::save_checkpoint(ctx.out / kPolicyCheckpoint, policy.params(),
                          config_hash(ctx.config));
  neural::save_checkpoint(ctx.out / kGlobalJointCheckpoint, genc.params(),
                          config_hash(ctx.config));
  if (!report.epochs.empty())
    std::cout << "train-rl: final mean reward " << report.epochs.back().mean_reward
              << ", train accuracy " << report.epochs.back().train_accuracy << "\n";
}

void stage_link(StageContext& ctx) {
  ctx.load_embeddings();
  ctx.load_corpus();
  ctx.load_processed_kb();
  ctx.load_candidates();
  ctx.load_psi();

  auto local = ctx.load_local();
  auto genc = ctx.load_global(kGlobalJointCheckpoint);
  neural::ParamStore policy_store;
  neural::load_checkpoint(ctx.out / kPolicyCheckpoint, policy_store,
                          config_hash(ctx.config));
  auto policy = selector::PolicyNetwork::attach(std::move(policy_store), ctx.policy_dims());

  const auto& docs = ctx.eval_docs();
  auto assets = build_assets(docs, ctx.candsets, local, ctx.kb, ctx.words, ctx.psi,
                             ctx.config.sequence_length, ctx.config.rank_mentions);
  auto linked = selector::link_documents(assets, policy, genc, ctx.config.top_k,
                                         ctx.config.use_global_encoding);

  std::ofstream os(ctx.out / kPredictionsArtifact);
  if (!os) throw ValidationError("cannot write predictions");
  for (const auto& doc : docs) {
    for (const auto& m : doc.mentions) {
      auto it = linked.find(m.mention_id);
      json j{{"doc_id", doc.doc_id},
             {"mention_id", m.mention_id},
             {"entity_id", it != linked.end() && it->second ? json(*it->second) : json(nullptr)}};
      os << j.dump() << '\n';
    }
  }
  std::cout << "link: wrote predictions for " << docs.size() << " documents ("
            << ctx.config.eval_split << " split)\n";
}

std::vector<eval::Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open: " + path.string());
  std::vector<eval::Prediction> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      eval::Prediction p;
      p.doc_id = j.at("doc_id").get<std::string>();
      p.mention_id = j.at("mention_id").get<std::string>();
      if (!j.at("entity_id").is_null()) p.entity_id = j.at("entity_id").get<std::string>();
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + " line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return out;
}

void stage_eval(StageContext& ctx) {
  ctx.load_embeddings();
  ctx.load_corpus();
  ctx.load_processed_kb();
  auto predictions = load_predictions(ctx.out / kPredictionsArtifact);
  auto gold = eval::gold_from_corpus(ctx.eval_docs());
  auto report = eval::score(predictions, gold);

  char buf[256];
  std::string csv = "accuracy,precision,recall,f1,predicted,gold,correct\n";
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%zu,%zu,%zu\n", report.accuracy,
                report.precision, report.recall, report.f1, report.predicted, report.gold,
                report.correct);
  csv += buf;
  write_csv(ctx.out / kMetricsArtifact, csv);

  auto buckets = eval::bucket_by_pageview(predictions, gold, ctx.kb);
  std::string bcsv = "bucket_millions,mentions,f1,accuracy\n";
  for (const auto& b : buckets) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f\n", b.label.c_str(), b.mentions,
                  b.metrics.f1, b.metrics.accuracy);
    bcsv += buf;
  }
  write_csv(ctx.out / kBucketsArtifact, bcsv);

  std::snprintf(buf, sizeof buf,
                "eval (%s split): accuracy %.4f  precision %.4f  recall %.4f  f1 %.4f\n",
                ctx.config.eval_split.c_str(), report.accuracy, report.precision,
                report.recall, report.f1);
  std::cout << buf;
  for (const auto& b : buckets)
    if (b.mentions > 0)
      std::cout << "  pageview " << b.label << "M: " << b.mentions << " mentions, f1 "
                << b.metrics.f1 << "\n";
}

void stage_ablate(StageContext& ctx) {
  ctx.load_embeddings();
  ctx.load_corpus();
  ctx.load_processed_kb();
  ctx.load_candidates();
  ctx.load_psi();
  auto local = ctx.load_local();

  eval::AblationContext actx;
  actx.train_docs = &ctx.split.train;
  actx.eval_docs = &ctx.eval_docs();
  actx.candsets = &ctx.candsets;
  actx.kb = &ctx.kb;
  actx.words = &ctx.words;
  actx.local = &local;
  actx.psi = &ctx.psi;
  actx.k = ctx.config.top_k;
  actx.global_hidden = ctx.config.global_hidden;
  actx.policy_hidden = ctx.config.policy_hidden;
  actx.policy_layers = ctx.config.policy_layers;
  actx.feature_proj_dim = ctx.config.feature_dim;
  actx.global_epochs = ctx.config.global_epochs;
  actx.global_batch = ctx.config.global_batch;
  actx.rl_epochs = ctx.config.rl_epochs;
  actx.lr = ctx.config.learning_rate;
  actx.clip_norm = ctx.config.clip_norm;
  actx.keep_prob = ctx.config.keep_prob;
  actx.seed = ctx.config.seed;

  std::vector<eval::AblationConfig> configs;
  for (int len : ctx.config.ablation_lengths)
    configs.push_back({len, true, true, eval::AblationConfig::Selection::kRl});
  configs.push_back(
      {ctx.config.sequence_length, false, true, eval::AblationConfig::Selection::kRl});
  configs.push_back(
      {ctx.config.sequence_length, true, false, eval::AblationConfig::Selection::kRl});
  configs.push_back(
      {ctx.config.sequence_length, true, true, eval::AblationConfig::Selection::kGreedy});

  auto rows = eval::run_ablation(actx, configs);
  write_csv(ctx.out / kAblationArtifact, eval::ablation_csv(rows));
  for (const auto& r : rows)
    std::cout << "ablate: L=" << r.config.sequence_length << " rank=" << r.config.rank_mentions
              << " global=" << r.config.use_global_encoding << " sel="
              << (r.config.selection == eval::AblationConfig::Selection::kGreedy ? "greedy"
                                                                                 : "rl")
              << " accuracy=" << r.accuracy << "\n";
}

}  // namespace

void run_stage(Stage stage, const RunConfig& config,
               const std::map<std::string, std::string>& overrides) {
  validate(config);
  if (config.out_dir.empty()) throw ConfigError("config: out_dir is required");
  std::filesystem::create_directories(config.out_dir);
  StageContext ctx(config);
  const auto hash = config_hash(config);
  const auto out = ctx.out;

  std::map<std::string, std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  auto dep = [&](const char* name) { require_stage(out, name, hash); };

  switch (stage) {
    case Stage::kBuildKb:
      inputs = {{"kb", config.kb_path}, {"entity_embeddings", config.entity_embeddings_path}};
      stage_build_kb(ctx);
      outputs = {out / kKbArtifact};
      break;
    case Stage::kGenCandidates:
      dep("build-kb");
      inputs = {{"corpus", config.corpus_path},
                {"kb_processed", out / kKbArtifact},
                {"word_embeddings", config.word_embeddings_path}};
      stage_gen_candidates(ctx);
      outputs = {out / kCandidatesArtifact};
      break;
    case Stage::kPretrainLocal:
      dep("build-kb");
      dep("gen-candidates");
      inputs = {{"corpus", config.corpus_path},
                {"kb_processed", out / kKbArtifact},
                {"candidates", out / kCandidatesArtifact}};
      stage_pretrain_local(ctx);
      outputs = {out / kLocalCheckpoint, out / kPsiArtifact};
      break;
    case Stage::kPretrainGlobal:
      dep("build-kb");
      dep("gen-candidates");
      dep("pretrain-local");
      inputs = {{"local_checkpoint", out / kLocalCheckpoint}, {"psi", out / kPsiArtifact}};
      stage_pretrain_global(ctx);
      outputs = {out / kGlobalCheckpoint};
      break;
    case Stage::kTrainRl:
      dep("pretrain-local");
      dep("pretrain-global");
      inputs = {{"local_checkpoint", out / kLocalCheckpoint},
                {"global_checkpoint", out / kGlobalCheckpoint}};
      stage_train_rl(ctx);
      outputs = {out / kPolicyCheckpoint, out / kGlobalJointCheckpoint};
      break;
    case Stage::kLink:
      dep("pretrain-local");
      dep("train-rl");
      inputs = {{"policy_checkpoint", out / kPolicyCheckpoint},
                {"global_joint_checkpoint", out / kGlobalJointCheckpoint}};
      stage_link(ctx);
      outputs = {out / kPredictionsArtifact};
      break;
    case Stage::kEval:
      dep("link");
      inputs = {{"predictions", out / kPredictionsArtifact}, {"corpus", config.corpus_path}};
      stage_eval(ctx);
      outputs = {out / kMetricsArtifact, out / kBucketsArtifact};
      break;
    case Stage::kAblate:
      dep("build-kb");
      dep("gen-candidates");
      dep("pretrain-local");
      inputs = {{"local_checkpoint", out / kLocalCheckpoint}, {"psi", out / kPsiArtifact}};
      stage_ablate(ctx);
      outputs = {out / kAblationArtifact};
      break;
  }
  write_manifest(config, stage_name(stage), overrides, inputs, outputs);
}

}  // namespace seqlink::pipeline
