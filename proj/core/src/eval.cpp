#include "seqlink/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

#include "seqlink/errors.hpp"
#include "seqlink/selector.hpp"

namespace seqlink::eval {

MetricsReport score(const std::vector<Prediction>& predictions, const GoldMap& gold) {
  std::set<MentionKey> seen;
  MetricsReport report;
  report.gold = gold.size();
  for (const auto& p : predictions) {
    MentionKey key{p.doc_id, p.mention_id};
    if (!seen.insert(key).second)
      throw ValidationError("score: duplicate prediction for mention " + p.doc_id + "/" +
                            p.mention_id);
    if (!p.entity_id) continue;  // NIL stays out of M
    ++report.predicted;
    auto it = gold.find(key);
    if (it != gold.end() && it->second == *p.entity_id) ++report.correct;
  }
  std::size_t uni = report.predicted + report.gold - report.correct;
  report.accuracy = uni ? static_cast<double>(report.correct) / uni : 0.0;
  report.precision =
      report.predicted ? static_cast<double>(report.correct) / report.predicted : 0.0;
  report.recall = report.gold ? static_cast<double>(report.correct) / report.gold : 0.0;
  report.f1 = (report.precision + report.recall) > 0.0
                  ? 2.0 * report.precision * report.recall / (report.precision + report.recall)
                  : 0.0;
  return report;
}

GoldMap gold_from_corpus(const std::vector<corpus::Document>& docs) {
  GoldMap gold;
  for (const auto& doc : docs)
    for (const auto& m : doc.mentions)
      if (m.gold_entity_id) gold[{doc.doc_id, m.mention_id}] = *m.gold_entity_id;
  return gold;
}

std::vector<BucketReport> bucket_by_pageview(const std::vector<Prediction>& predictions,
                                             const GoldMap& gold,
                                             const corpus::KnowledgeBase& kb,
                                             const std::vector<double>& edges_millions) {
  const std::size_t buckets = edges_millions.size() + 1;
  auto label = [&](std::size_t b) -> std::string {
    char buf[64];
    if (b == 0) {
      std::snprintf(buf, sizeof buf, "<%g", edges_millions.front());
    } else if (b == buckets - 1) {
      std::snprintf(buf, sizeof buf, ">%g", edges_millions.back());
    } else {
      std::snprintf(buf, sizeof buf, "%g-%g", edges_millions[b - 1], edges_millions[b]);
    }
    return buf;
  };

  // Left-closed, right-open intervals over pageview / 1e6.
  auto bucket_of = [&](long long pageview) {
    double millions = static_cast<double>(pageview) / 1e6;
    std::size_t b = 0;
    while (b < edges_millions.size() && millions >= edges_millions[b]) ++b;
    return b;
  };

  std::vector<GoldMap> bucket_gold(buckets);
  for (const auto& [key, entity_id] : gold) {
    const auto* rec = kb.find(entity_id);
    if (!rec || !rec->pageview) continue;  // unknown pageview: excluded
    bucket_gold[bucket_of(*rec->pageview)].emplace(key, entity_id);
  }

  std::vector<BucketReport> out(buckets);
  for (std::size_t b = 0; b < buckets; ++b) {
    out[b].label = label(b);
    out[b].lo_millions = b == 0 ? 0.0 : edges_millions[b - 1];
    out[b].hi_millions =
        b == buckets - 1 ? std::numeric_limits<double>::infinity() : edges_millions[b];
    out[b].mentions = bucket_gold[b].size();
    std::vector<Prediction> subset;
    for (const auto& p : predictions)
      if (bucket_gold[b].count({p.doc_id, p.mention_id})) subset.push_back(p);
    out[b].metrics = score(subset, bucket_gold[b]);
  }
  return out;
}

double greedy_accuracy(const std::vector<DocAssets>& docs) {
  long total = 0, correct = 0;
  for (const auto& doc : docs) {
    for (const auto& [id, assets] : doc.mentions) {
      if (!assets.has_gold) continue;
      ++total;
      int best = 0;
      for (std::size_t i = 1; i < assets.psi.size(); ++i)
        if (assets.psi[i] > assets.psi[best]) best = static_cast<int>(i);
      if (best == assets.gold_index) ++correct;
    }
  }
  if (total == 0) throw ValidationError("greedy_accuracy: no gold-labeled mentions");
  return static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

std::uint64_t variant_seed(std::uint64_t base, const AblationConfig& cfg) {
  std::string tag = "ablation/L=" + std::to_string(cfg.sequence_length) +
                    ";rank=" + std::to_string(cfg.rank_mentions) +
                    ";global=" + std::to_string(cfg.use_global_encoding) + ";sel=" +
                    (cfg.selection == AblationConfig::Selection::kGreedy ? "greedy" : "rl");
  return base ^ fnv1a64(tag);
}

std::vector<Prediction> greedy_predictions(const std::vector<DocAssets>& docs) {
  std::vector<Prediction> out;
  for (const auto& doc : docs) {
    for (const auto& id : doc.nil_mention_ids) out.push_back({doc.doc_id, id, std::nullopt});
    for (const auto& [id, assets] : doc.mentions) {
      int best = 0;
      for (std::size_t i = 1; i < assets.psi.size(); ++i)
        if (assets.psi[i] > assets.psi[best]) best = static_cast<int>(i);
      out.push_back({doc.doc_id, id, assets.candidate_ids[best]});
    }
  }
  return out;
}

}  // namespace

std::vector<AblationRow> run_ablation(const AblationContext& ctx,
                                      const std::vector<AblationConfig>& configs) {
  std::vector<AblationRow> rows;
  GoldMap gold = gold_from_corpus(*ctx.eval_docs);

  for (const auto& cfg : configs) {
    auto started = std::chrono::steady_clock::now();
    std::uint64_t seed = variant_seed(ctx.seed, cfg);

    auto train_assets = build_assets(*ctx.train_docs, *ctx.candsets, *ctx.local, *ctx.kb,
                                     *ctx.words, *ctx.psi, cfg.sequence_length,
                                     cfg.rank_mentions);
    auto eval_assets = build_assets(*ctx.eval_docs, *ctx.candsets, *ctx.local, *ctx.kb,
                                    *ctx.words, *ctx.psi, cfg.sequence_length,
                                    cfg.rank_mentions);

    AblationRow row;
    row.config = cfg;
    if (cfg.selection == AblationConfig::Selection::kGreedy) {
      row.accuracy = greedy_accuracy(eval_assets);
      row.f1 = score(greedy_predictions(eval_assets), gold).f1;
    } else {
      global_encoder::GlobalEncoder genc(ctx.local->mention_dim(),
                                         ctx.local->entity_vec_dim(), ctx.global_hidden, seed);
      Rng pretrain_rng = make_rng(seed, "ablation/pretrain");
      auto pre_seqs = build_pretrain_sequences(train_assets, pretrain_rng);
      global_encoder::PretrainOptions popts;
      popts.epochs = ctx.global_epochs;
      popts.batch_size = ctx.global_batch;
      popts.lr = ctx.lr;
      popts.keep_prob = ctx.keep_prob;
      popts.seed = seed;
      genc.pretrain(pre_seqs, popts);

      selector::PolicyDims pdims;
      pdims.mention_dim = ctx.local->mention_dim();
      pdims.entity_vec_dim = ctx.local->entity_vec_dim();
      pdims.feature_proj_dim = ctx.feature_proj_dim;
      pdims.global_dim = ctx.global_hidden;
      pdims.hidden = ctx.policy_hidden;
      pdims.layers = ctx.policy_layers;
      selector::PolicyNetwork policy(pdims, seed);

      selector::JointTrainOptions jopts;
      jopts.epochs = ctx.rl_epochs;
      jopts.lr = ctx.lr;
      jopts.clip_norm = ctx.clip_norm;
      jopts.use_global_encoding = cfg.use_global_encoding;
      jopts.seed = seed;
      selector::train_joint(train_assets, policy, genc, ctx.k, jopts);

      row.accuracy = selector::evaluate_accuracy(eval_assets, policy, genc, ctx.k,
                                                 cfg.use_global_encoding);
      auto linked = selector::link_documents(eval_assets, policy, genc, ctx.k,
                                             cfg.use_global_encoding);
      std::vector<Prediction> preds;
      for (const auto& doc : eval_assets)
        for (const auto& [id, assets] : doc.mentions)
          preds.push_back({doc.doc_id, id, linked.at(id)});
      for (const auto& doc : eval_assets)
        for (const auto& id : doc.nil_mention_ids)
          preds.push_back({doc.doc_id, id, std::nullopt});
      row.f1 = score(preds, gold).f1;
    }
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "sequence_length,rank_mentions,use_global_encoding,selection,accuracy,f1,"
                    "wall_seconds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%s,%.6f,%.6f,%.3f\n", r.config.sequence_length,
                  r.config.rank_mentions ? 1 : 0, r.config.use_global_encoding ? 1 : 0,
                  r.config.selection == AblationConfig::Selection::kGreedy ? "greedy" : "rl",
                  r.accuracy, r.f1, r.wall_seconds);
    out += buf;
  }
  return out;
}

}  // namespace seqlink::eval
