#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqlink/corpus.hpp"
#include "seqlink/episode_data.hpp"

namespace seqlink::eval {

struct Prediction {
  std::string doc_id;
  std::string mention_id;
  std::optional<std::string> entity_id;  // nullopt = NIL
};

using MentionKey = std::pair<std::string, std::string>;  // (doc_id, mention_id)
using GoldMap = std::map<MentionKey, std::string>;

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t predicted = 0;  // |M|, non-NIL predictions
  std::size_t gold = 0;       // |M*|
  std::size_t correct = 0;    // |M ∩ M*|
};

// Micro metrics over linked-mention sets: M is the set of (mention, entity)
// pairs the system output (NIL excluded), M* the gold pairs. Accuracy is
// |M ∩ M*| / |M ∪ M*|. A duplicate prediction for one mention is a
// validation error.
MetricsReport score(const std::vector<Prediction>& predictions, const GoldMap& gold);

GoldMap gold_from_corpus(const std::vector<corpus::Document>& docs);

struct BucketReport {
  std::string label;        // e.g. "0.1-1"
  double lo_millions = 0.0;
  double hi_millions = 0.0;  // infinity for the open top bucket
  std::size_t mentions = 0;  // gold mentions whose entity falls in the bucket
  MetricsReport metrics;
};

// Default page-view bucket edges, in millions of visits.
inline const std::vector<double> kDefaultBucketEdgesMillions = {0.01, 0.1, 1.0, 5.0, 10.0};

// Buckets gold mentions by their entity's pageview (left-closed, right-open
// intervals); entities without a known pageview are excluded.
std::vector<BucketReport> bucket_by_pageview(const std::vector<Prediction>& predictions,
                                             const GoldMap& gold,
                                             const corpus::KnowledgeBase& kb,
                                             const std::vector<double>& edges_millions =
                                                 kDefaultBucketEdgesMillions);

struct AblationConfig {
  int sequence_length = 4;
  bool rank_mentions = true;
  bool use_global_encoding = true;
  enum class Selection { kRl, kGreedy } selection = Selection::kRl;
};

struct AblationRow {
  AblationConfig config;
  double accuracy = 0.0;
  double f1 = 0.0;
  double wall_seconds = 0.0;
};

// Everything a variant run needs; the local encoder is shared (frozen) across
// variants while the global encoder and policy are retrained per variant.
struct AblationContext {
  const std::vector<corpus::Document>* train_docs = nullptr;
  const std::vector<corpus::Document>* eval_docs = nullptr;
  const candgen::CandidateMap* candsets = nullptr;
  const corpus::KnowledgeBase* kb = nullptr;
  const corpus::EmbeddingTable* words = nullptr;
  const local_encoder::LocalEncoder* local = nullptr;
  const local_encoder::PsiTable* psi = nullptr;
  int k = 5;
  int global_hidden = 700;
  int policy_hidden = 256;
  int policy_layers = 4;
  int feature_proj_dim = 50;
  int global_epochs = 10;
  int global_batch = 16;
  int rl_epochs = 200;
  double lr = 1e-3;
  double clip_norm = 5.0;
  double keep_prob = 0.8;
  std::uint64_t seed = 42;
};

// Greedy baseline: argmax local similarity per mention, independently.
double greedy_accuracy(const std::vector<DocAssets>& docs);

// Trains and evaluates each variant with a seed derived from the variant
// fields (identical configs give identical results). Rows keep input order.
std::vector<AblationRow> run_ablation(const AblationContext& ctx,
                                      const std::vector<AblationConfig>& configs);

std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace seqlink::eval
