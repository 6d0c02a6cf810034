#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqlink/neural.hpp"

namespace seqlink::corpus {

// Reserved token used to right-pad context windows; it is never present in
// an embedding table, so it always resolves to the zero vector.
inline constexpr const char* kPadToken = "<pad>";

struct MentionOccurrence {
  std::string doc_id;
  std::string mention_id;
  std::string surface;
  std::vector<std::string> context_tokens;  // fixed window size once prepared
  std::optional<std::string> gold_entity_id;
  int position = 0;  // token offset in the document
};

struct Document {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<MentionOccurrence> mentions;  // sorted ascending by position
};

struct EntityRecord {
  std::string entity_id;
  std::string title;
  std::vector<std::string> description_tokens;  // at most the keyword budget
  neural::Vec embedding;
  std::optional<long long> pageview;  // monthly visits; absent when unknown
};

class KnowledgeBase {
 public:
  void add(EntityRecord record);
  // Registers `surface` as an alias of an already-added entity. Lookups are
  // case-normalized, so "France" and "france" hit the same list.
  void add_alias(std::string_view surface, const std::string& entity_id);

  const EntityRecord* find(const std::string& entity_id) const;
  const std::vector<std::string>* lookup_alias(std::string_view surface) const;

  std::size_t size() const { return entities_.size(); }
  const std::map<std::string, EntityRecord>& entities() const { return entities_; }
  const std::map<std::string, std::vector<std::string>>& alias_index() const {
    return alias_index_;
  }

  // Entities whose pretrained embedding was absent at load time.
  int missing_embedding_count = 0;

 private:
  std::map<std::string, EntityRecord> entities_;
  std::map<std::string, std::vector<std::string>> alias_index_;
};

class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dim);
  // Keeps the first occurrence when a token is inserted twice.
  void insert(const std::string& token, neural::Vec v);
  // Unknown tokens resolve to the zero vector; lookups never mutate state.
  const neural::Vec& lookup(const std::string& token) const;
  bool contains(const std::string& token) const { return vectors_.count(token) > 0; }
  int dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

 private:
  int dim_;
  neural::Vec zero_;
  std::map<std::string, neural::Vec> vectors_;
};

// Lowercases, splits on whitespace and strips surrounding punctuation.
std::vector<std::string> tokenize(std::string_view text);

// Lowercased, whitespace-squeezed form used for alias keys.
std::string normalize_surface(std::string_view surface);

// TextRank keyword selection: undirected co-occurrence graph over adjacent
// tokens, damping 0.85, convergence when the max score change drops below
// 1e-4 (at most 100 iterations). Returns at most `budget` tokens ordered by
// descending score, ties broken by first occurrence.
std::vector<std::string> compress_description(const std::vector<std::string>& tokens,
                                              int budget);

// The `window` tokens around `position` (the mention token itself excluded,
// split 7 before / 8 after for the default 15), right-padded with kPadToken
// so the result always has exactly `window` entries.
std::vector<std::string> context_window(const std::vector<std::string>& tokens, int position,
                                        int window);
void prepare_contexts(std::vector<Document>& docs, int window);

std::vector<Document> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);

EmbeddingTable load_embeddings(const std::filesystem::path& path, int dim);

// Raw KB ingestion: descriptions arrive as free text and are compressed to
// `keyword_budget` tokens; embeddings are joined from `entity_embeddings`
// keyed by entity id (missing ids fall back to the zero vector and bump
// missing_embedding_count).
KnowledgeBase load_kb(const std::filesystem::path& path, int keyword_budget,
                      const EmbeddingTable& entity_embeddings);
// Processed form: description_tokens are stored as-is (already compressed).
KnowledgeBase load_kb_processed(const std::filesystem::path& path,
                                const EmbeddingTable& entity_embeddings);
void save_kb_processed(const std::filesystem::path& path, const KnowledgeBase& kb);

}  // namespace seqlink::corpus
