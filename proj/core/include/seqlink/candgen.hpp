#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seqlink/corpus.hpp"
#include "seqlink/neural.hpp"

namespace seqlink::candgen {

struct Candidate {
  std::string entity_id;
  double prior_score = 0.0;
};

struct CandidateSet {
  std::string mention_id;
  std::vector<Candidate> candidates;  // sorted by non-increasing score
  int k = 0;
};

struct CandidateFeatures {
  double string_sim = 0.0;     // Jaro-Winkler of title vs surface, in [0,1]
  double semantic_sim = 0.0;   // cosine(context centroid, entity embedding), in [-1,1]
  double pageview_log = 0.0;   // log10(1 + pageview)
  int edit_distance = 0;       // Levenshtein of title vs surface
  int common_word_count = 0;   // |context tokens ∩ description tokens|
};

inline constexpr int kFeatureCount = 5;
neural::Vec feature_vector(const CandidateFeatures& f);

// Standard Jaro-Winkler similarity (prefix scale 0.1, max prefix 4),
// case-insensitive.
double jaro_winkler(std::string_view a, std::string_view b);
int levenshtein(std::string_view a, std::string_view b);

// Exact alias match first; when that yields nothing, word n-grams of the
// surface are tried from length len-1 down to 1, stopping at the first
// length with any hit. The result is deduplicated.
std::vector<std::string> generate_candidates(const corpus::MentionOccurrence& mention,
                                             const corpus::KnowledgeBase& kb);

CandidateFeatures compute_features(const corpus::MentionOccurrence& mention,
                                   const corpus::EntityRecord& entity,
                                   const corpus::EmbeddingTable& words);

// Min-max normalization of each feature across one mention's candidates
// (constant features normalize to 0).
std::vector<neural::Vec> normalize_features(const std::vector<CandidateFeatures>& feats);

// Linear scorer over the normalized features; keeps the top k by score,
// ties broken by ascending entity id.
CandidateSet rank_and_filter(const std::string& mention_id,
                             const std::vector<std::pair<std::string, CandidateFeatures>>& scored,
                             int k, const neural::Vec& weights);

using CandidateMap = std::map<std::string, CandidateSet>;  // keyed by mention_id

// Fraction of gold-labeled mentions whose gold entity is within the first k
// candidates. Throws ValidationError when no mention carries a gold label.
double recall_at_k(const std::vector<corpus::Document>& docs, const CandidateMap& candsets,
                   int k);

CandidateMap generate_all(const std::vector<corpus::Document>& docs,
                          const corpus::KnowledgeBase& kb,
                          const corpus::EmbeddingTable& words, int k,
                          const neural::Vec& weights);

void save_candidates(const std::filesystem::path& path, const CandidateMap& candsets);
CandidateMap load_candidates(const std::filesystem::path& path, int k);

}  // namespace seqlink::candgen
