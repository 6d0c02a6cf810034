#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqlink/candgen.hpp"
#include "seqlink/corpus.hpp"
#include "seqlink/neural.hpp"

namespace seqlink::local_encoder {

struct LocalDims {
  int word_dim = 300;
  int hidden = 512;      // context and description LSTM units
  int entity_dim = 300;  // pretrained entity embedding
  int mlp_hidden = 256;  // two hidden layers feeding the scalar similarity
};

struct TrainOptions {
  int epochs = 20;
  int batch_size = 64;
  double lr = 1e-3;
  double margin = 0.1;
  double keep_prob = 0.8;
  std::uint64_t seed = 42;
};

struct TrainStats {
  std::vector<double> epoch_losses;  // mean hinge loss per epoch
  long pair_count = 0;               // (gold, negative) pairs per epoch
  long skipped_no_gold = 0;          // mentions whose gold missed the candidate set
  long margin_violations = 0;        // active pairs after the final epoch
};

// Context LSTM + description LSTM + similarity MLP. The mention vector is
// the final hidden state over the context window; the entity vector is the
// description encoding concatenated with the pretrained embedding; the
// similarity is a scalar MLP over their concatenation.
class LocalEncoder {
 public:
  LocalEncoder(const LocalDims& dims, std::uint64_t seed);
  // Binds to parameters loaded from a checkpoint.
  static LocalEncoder attach(neural::ParamStore store, const LocalDims& dims);

  neural::Vec encode_mention(const corpus::MentionOccurrence& mention,
                             const corpus::EmbeddingTable& words) const;
  neural::Vec encode_entity(const corpus::EntityRecord& entity,
                            const corpus::EmbeddingTable& words) const;
  double similarity(const neural::Vec& mention_vec, const neural::Vec& entity_vec) const;

  // Hinge loss for one (gold, negative) pair with parameter gradients
  // accumulated at `scale`; this is the unit the trainer and the gradient
  // checks share. Dropout applies only when rng is non-null and
  // keep_prob < 1.
  double pair_loss_and_grads(const corpus::MentionOccurrence& mention,
                             const corpus::EntityRecord& gold,
                             const corpus::EntityRecord& negative,
                             const corpus::EmbeddingTable& words, double margin, double scale,
                             double keep_prob = 1.0, Rng* rng = nullptr);

  TrainStats train(const std::vector<corpus::Document>& docs,
                   const candgen::CandidateMap& candsets, const corpus::KnowledgeBase& kb,
                   const corpus::EmbeddingTable& words, const TrainOptions& opts);

  int mention_dim() const { return dims_.hidden; }
  int entity_vec_dim() const { return dims_.hidden + dims_.entity_dim; }
  const LocalDims& dims() const { return dims_; }
  neural::ParamStore& params() { return store_; }
  const neural::ParamStore& params() const { return store_; }

 private:
  LocalEncoder() = default;
  void bind();

  LocalDims dims_;
  neural::ParamStore store_;
  neural::LstmCell context_lstm_;
  neural::LstmCell description_lstm_;
  std::vector<neural::Dense> mlp_;
};

// Frozen per-candidate similarity scores, keyed by mention id. Candidate
// order matches the candidate set.
struct PsiTable {
  std::map<std::string, std::vector<std::pair<std::string, double>>> scores;

  // Maximum similarity over a mention's candidates; nullopt for an unknown
  // mention or an empty candidate set (the NIL case).
  std::optional<double> psi_max(const std::string& mention_id) const;
};

PsiTable score_all(const LocalEncoder& encoder, const std::vector<corpus::Document>& docs,
                   const candgen::CandidateMap& candsets, const corpus::KnowledgeBase& kb,
                   const corpus::EmbeddingTable& words);

void save_psi(const std::filesystem::path& path, const PsiTable& table);
PsiTable load_psi(const std::filesystem::path& path);

}  // namespace seqlink::local_encoder
