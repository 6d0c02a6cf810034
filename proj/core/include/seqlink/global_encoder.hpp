#pragma once

#include <map>
#include <string>
#include <vector>

#include "seqlink/corpus.hpp"
#include "seqlink/neural.hpp"

namespace seqlink::global_encoder {

// A fixed-length run of adjacent mentions. The first `distinct` entries are
// real mentions; the tail repeats the final real mention until the sequence
// reaches length L.
struct MentionSequence {
  std::string doc_id;
  std::vector<std::string> mention_ids;
  int distinct = 0;

  int length() const { return static_cast<int>(mention_ids.size()); }
};

// Consecutive non-overlapping windows of up to L mentions in document order;
// a short final window is padded by repeating its last mention. An empty
// mention list yields no sequences.
std::vector<MentionSequence> segment_mentions(const std::string& doc_id,
                                              const std::vector<std::string>& mention_ids,
                                              int L);
std::vector<MentionSequence> segment_mentions(const corpus::Document& doc, int L);

// Reorders a segment so the easiest mention (highest max local similarity)
// comes first: descending psi_max, stable on ties, with padding re-applied so
// it always repeats the final mention of the new order.
MentionSequence order_by_difficulty(const MentionSequence& seq,
                                    const std::map<std::string, double>& psi_max);

struct GlobalState {
  neural::Vec h, c;
  int step = 0;
};

struct PretrainOptions {
  int epochs = 10;
  int batch_size = 16;  // sequences per update
  double lr = 1e-3;
  double keep_prob = 0.8;
  std::uint64_t seed = 42;
};

struct PretrainStats {
  std::vector<double> epoch_losses;  // mean BCE per epoch
  long sequences_skipped = 0;        // sequences without any gold label
};

// One pretraining step: the sampled entity vector for one mention, the label
// (1 when it is the gold entity) and whether the step carries a label at all.
struct PretrainStep {
  neural::Vec mention_vec;
  neural::Vec entity_vec;
  int label = 0;
  bool labeled = true;
};
using PretrainSequence = std::vector<PretrainStep>;

// LSTM over concat(mention vector, selected entity vector) plus a scalar
// probe used for pretraining and for the joint-phase update signal. The
// probe never participates in inference.
class GlobalEncoder {
 public:
  GlobalEncoder(int mention_dim, int entity_vec_dim, int hidden, std::uint64_t seed);
  static GlobalEncoder attach(neural::ParamStore store, int mention_dim, int entity_vec_dim,
                              int hidden);

  GlobalState initial_state() const;
  // One LSTM step over the selected pair; `step` is incremented.
  GlobalState encode_selection(const GlobalState& state, const neural::Vec& mention_vec,
                               const neural::Vec& entity_vec) const;
  GlobalState encode_selection(const GlobalState& state, const neural::Vec& mention_vec,
                               const neural::Vec& entity_vec,
                               neural::LstmStepCache& cache) const;

  // sigmoid(w . h + b)
  double probe(const neural::Vec& h) const;

  // BCE over one trajectory (labeled steps only), gradients accumulated at
  // `scale` per step; the unit shared by pretrain() and the gradient checks.
  // Input dropout applies only when rng is non-null and keep_prob < 1.
  double sequence_loss_and_grads(const PretrainSequence& seq, double scale,
                                 double keep_prob = 1.0, Rng* rng = nullptr);

  PretrainStats pretrain(const std::vector<PretrainSequence>& sequences,
                         const PretrainOptions& opts);

  int hidden_dim() const { return hidden_; }
  int input_dim() const { return mention_dim_ + entity_vec_dim_; }
  neural::ParamStore& params() { return store_; }
  const neural::ParamStore& params() const { return store_; }
  const neural::LstmCell& cell() const { return lstm_; }

  // Probe gradient helper for the joint phase: accumulates parameter
  // gradients for d(bce)/d(probe output) and returns d(loss)/d(h).
  neural::Vec probe_backward(const neural::Vec& h, double label, double scale);

 private:
  GlobalEncoder() = default;
  void bind();

  int mention_dim_ = 0, entity_vec_dim_ = 0, hidden_ = 0;
  neural::ParamStore store_;
  neural::LstmCell lstm_;
};

}  // namespace seqlink::global_encoder
