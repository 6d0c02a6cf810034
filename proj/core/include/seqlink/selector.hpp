#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqlink/episode_data.hpp"
#include "seqlink/global_encoder.hpp"
#include "seqlink/neural.hpp"

namespace seqlink::selector {

// Per-step input of the policy network (Eq. 4 style state): the mention
// vector tiled across the k candidate rows, the candidate entity vectors,
// the per-candidate normalized features and the previous global encoding.
// Rows beyond the real candidate count are zero and masked out. The raw
// feature rows are extended to the configured feature dimension by a
// trainable projection inside the policy network.
struct EpisodeState {
  neural::Mat mention_block;    // k x mention_dim
  neural::Mat candidate_block;  // k x entity_vec_dim
  neural::Mat feature_block;    // k x candgen::kFeatureCount
  neural::Vec global_vec;       // previous global LSTM hidden state
  std::vector<bool> valid;      // row mask

  int k() const { return static_cast<int>(valid.size()); }
};

EpisodeState build_state(const MentionAssets& assets,
                         const global_encoder::GlobalState& global_state, int k,
                         bool use_global_encoding);

struct ActionRecord {
  int t = 0;
  int chosen_index = 0;
  double log_prob = 0.0;
  int correct = 0;  // 1 when the chosen entity equals gold
};

struct PolicyDims {
  int mention_dim = 0;
  int entity_vec_dim = 0;
  int feature_proj_dim = 50;  // extended feature dimension
  int global_dim = 0;
  int hidden = 256;
  int layers = 4;
};

struct PolicyCache {
  neural::DenseCache proj;
  std::vector<neural::DenseCache> hidden;
  neural::DenseCache head;
  neural::Vec probs;
  std::vector<bool> valid;
};

// Feature projection, `layers` relu layers and a scalar head per candidate
// row; the k logits go through a masked softmax.
class PolicyNetwork {
 public:
  PolicyNetwork(const PolicyDims& dims, std::uint64_t seed);
  static PolicyNetwork attach(neural::ParamStore store, const PolicyDims& dims);

  neural::Vec logits(const EpisodeState& state) const;
  neural::Vec forward(const EpisodeState& state) const;
  neural::Vec forward(const EpisodeState& state, PolicyCache& cache) const;
  // Accumulates parameter gradients for d(loss)/d(logits).
  void backward(const PolicyCache& cache, const neural::Vec& dlogits);

  const PolicyDims& dims() const { return dims_; }
  neural::ParamStore& params() { return store_; }
  const neural::ParamStore& params() const { return store_; }

 private:
  PolicyNetwork() = default;
  void bind();
  neural::Mat assemble(const EpisodeState& state, neural::DenseCache& proj_cache) const;

  PolicyDims dims_;
  neural::ParamStore store_;
  neural::Dense feature_proj_;
  std::vector<neural::Dense> hidden_;
  neural::Dense head_;
};

enum class SelectMode { kSample, kArgmax };

// Sampling uses the seeded rng; argmax breaks ties toward the lowest index.
int select_action(const neural::Vec& probs, SelectMode mode, Rng& rng);

// Delayed reward per action: a correct action earns the count of correct
// actions from its step to the end; a wrong one earns that count plus t - T
// (1-based t). `horizon` substitutes T when the flags cover only the
// distinct prefix of a padded sequence.
std::vector<double> delayed_rewards(const std::vector<int>& correct_flags);
std::vector<double> delayed_rewards(const std::vector<int>& correct_flags, int horizon);

struct Episode {
  global_encoder::MentionSequence sequence;
  std::vector<ActionRecord> actions;  // length L
  std::vector<double> rewards;        // length L; padded steps stay 0
  // Training caches (kept only when an episode is recorded for updates).
  std::vector<PolicyCache> policy_caches;
  std::vector<neural::LstmStepCache> global_caches;
  std::vector<neural::Vec> global_hs;  // h after each step
};

struct EpisodeResult {
  Episode episode;
  std::map<std::string, std::string> selections;  // mention_id -> entity_id
};

// Runs one ordered sequence start to finish: build state, policy forward,
// action selection, then the global encoder consumes the selected pair.
EpisodeResult run_episode(const DocAssets& doc, const global_encoder::MentionSequence& seq,
                          const PolicyNetwork& policy,
                          const global_encoder::GlobalEncoder& genc, int k, SelectMode mode,
                          Rng& rng, bool use_global_encoding, bool record_caches);

// REINFORCE ascent on sum_t R(a_t) log pi(a_t | s_t) over the recorded
// episodes (padded steps excluded), via one Adam step with global-norm clip.
void reinforce_update(const std::vector<Episode*>& episodes, PolicyNetwork& policy,
                      double lr, double clip_norm, bool mean_baseline);

struct JointTrainOptions {
  int epochs = 200;
  double lr = 1e-3;
  double clip_norm = 5.0;
  bool mean_baseline = false;
  bool use_global_encoding = true;
  std::uint64_t seed = 42;
};

struct EpochTelemetry {
  int epoch = 0;
  double mean_reward = 0.0;     // mean per-episode total reward
  double train_accuracy = 0.0;  // sampled selections matching gold
  double wall_seconds = 0.0;
};

struct JointTrainReport {
  std::vector<EpochTelemetry> epochs;
};

// Algorithm: per document, per ordered sequence, sample an episode and apply
// the policy update; after the document's sequences, the global LSTM is
// updated from a scalar probe on its hidden states against the sampled
// correctness labels.
JointTrainReport train_joint(const std::vector<DocAssets>& docs, PolicyNetwork& policy,
                             global_encoder::GlobalEncoder& genc, int k,
                             const JointTrainOptions& opts);

// Argmax rollout over every link sequence; NIL mentions map to nullopt.
std::map<std::string, std::optional<std::string>> link_documents(
    const std::vector<DocAssets>& docs, const PolicyNetwork& policy,
    const global_encoder::GlobalEncoder& genc, int k, bool use_global_encoding);

// Fraction of gold-labeled linkable mentions selected correctly in argmax mode.
double evaluate_accuracy(const std::vector<DocAssets>& docs, const PolicyNetwork& policy,
                         const global_encoder::GlobalEncoder& genc, int k,
                         bool use_global_encoding);

}  // namespace seqlink::selector
