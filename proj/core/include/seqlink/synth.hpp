#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace seqlink::synth {

// Desk-scale fixture generator. Each topic owns a family of entities with
// correlated embeddings; documents stick to one topic. A mention is either
// unambiguous (its surface aliases only the gold entity) or shares a surface
// with one same-group entity per topic. Coherence strength is the per-mention
// probability that the surrounding words are drawn from the topic vocabulary
// instead of the uninformative shared pool; low values force the linker to
// lean on previously selected entities.
struct SyntheticSpec {
  int num_docs = 200;
  int mentions_per_doc = 8;
  int k = 5;              // candidate count for ambiguous surfaces (= topics)
  int vocab_size = 400;   // topic vocabularies + shared pool
  double coherence = 0.5;
  double ambiguity = 0.5;
  std::uint64_t seed = 42;

  int groups_per_topic = 12;
  int word_dim = 32;
  int entity_dim = 32;
};

struct SynthResult {
  std::filesystem::path corpus_path;
  std::filesystem::path kb_path;
  std::filesystem::path word_embeddings_path;
  std::filesystem::path entity_embeddings_path;
  std::filesystem::path config_path;
  int entities = 0;
  int mentions = 0;
};

// Writes corpus.jsonl, kb.jsonl, words.vec, entities.vec and a ready-to-run
// config.json into out_dir. Output is byte-identical for a fixed spec.
SynthResult generate(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace seqlink::synth
