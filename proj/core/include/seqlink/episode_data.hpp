#pragma once

#include <map>
#include <string>
#include <vector>

#include "seqlink/candgen.hpp"
#include "seqlink/corpus.hpp"
#include "seqlink/global_encoder.hpp"
#include "seqlink/local_encoder.hpp"

namespace seqlink {

// Frozen per-mention inputs consumed by global pretraining and the selector:
// everything derived from the local encoder is computed once up front.
struct MentionAssets {
  std::string mention_id;
  neural::Vec mention_vec;
  std::vector<std::string> candidate_ids;
  std::vector<neural::Vec> candidate_vecs;  // entity vectors
  std::vector<neural::Vec> features;        // min-max normalized, kFeatureCount dims
  std::vector<double> psi;                  // local similarity per candidate
  int gold_index = -1;                      // -1 when gold is absent from the set
  bool has_gold = false;                    // the mention carries a gold label
};

struct DocAssets {
  std::string doc_id;
  std::map<std::string, MentionAssets> mentions;
  // Sequences over gold-labeled linkable mentions (training episodes).
  std::vector<global_encoder::MentionSequence> train_sequences;
  // Sequences over every linkable mention (inference).
  std::vector<global_encoder::MentionSequence> link_sequences;
  // Mentions with an empty candidate set; they are predicted NIL.
  std::vector<std::string> nil_mention_ids;
};

std::vector<DocAssets> build_assets(const std::vector<corpus::Document>& docs,
                                    const candgen::CandidateMap& candsets,
                                    const local_encoder::LocalEncoder& encoder,
                                    const corpus::KnowledgeBase& kb,
                                    const corpus::EmbeddingTable& words,
                                    const local_encoder::PsiTable& psi, int sequence_length,
                                    bool rank_mentions);

// Pretraining trajectories for the global encoder: each step consumes either
// the gold entity (label 1) or a uniformly sampled non-gold candidate
// (label 0), one negative per positive in expectation. Steps without a gold
// candidate are encoded but unlabeled.
std::vector<global_encoder::PretrainSequence> build_pretrain_sequences(
    const std::vector<DocAssets>& docs, Rng& rng);

}  // namespace seqlink
