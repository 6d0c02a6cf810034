#include "seqlink/synth.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "seqlink/config.hpp"
#include "seqlink/errors.hpp"
#include "seqlink/neural.hpp"
#include "seqlink/rng.hpp"

namespace seqlink::synth {

using neural::Vec;
using nlohmann::json;

namespace {

void validate(const SyntheticSpec& s) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("synth: ") + what);
  };
  require(s.num_docs >= 1, "num_docs must be >= 1");
  require(s.mentions_per_doc >= 1, "mentions_per_doc must be >= 1");
  require(s.k >= 1, "k must be >= 1 (it would produce zero candidates)");
  require(s.groups_per_topic >= 1, "groups_per_topic must be >= 1");
  require(s.coherence >= 0.0 && s.coherence <= 1.0, "coherence must be in [0,1]");
  require(s.ambiguity >= 0.0 && s.ambiguity <= 1.0, "ambiguity must be in [0,1]");
  require(s.word_dim >= 2 && s.entity_dim >= 2, "embedding dims must be >= 2");
  require(s.vocab_size >= 4 * (s.k + 1), "vocab_size too small for the topic count");
}

std::string fmt(int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*d", width, value);
  return buf;
}

void write_embedding(std::ofstream& os, const std::string& key, const Vec& v) {
  os << key;
  char buf[32];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, " %.6f", v[i]);
    os << buf;
  }
  os << '\n';
}

}  // namespace

SynthResult generate(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  validate(spec);
  std::filesystem::create_directories(out_dir);

  const int topics = spec.k;  // one confusable entity per topic and group
  const int topic_words = (spec.vocab_size / 2) / topics;
  const int generic_words = spec.vocab_size - topic_words * topics;

  Rng emb_rng = make_rng(spec.seed, "synth/embeddings");
  Rng doc_rng = make_rng(spec.seed, "synth/documents");
  Rng kb_rng = make_rng(spec.seed, "synth/kb");

  // Topic centroids: independent unit vectors.
  std::vector<Vec> centroid(topics);
  for (int t = 0; t < topics; ++t) {
    Vec c(spec.word_dim);
    for (int d = 0; d < spec.word_dim; ++d) c[d] = gaussian(emb_rng, 0.0, 1.0);
    centroid[t] = c / c.norm();
  }

  // Vocabulary. Topic words cluster around their centroid; the shared pool
  // carries no topic signal.
  std::vector<std::vector<std::string>> topic_vocab(topics);
  std::ofstream words_os(out_dir / "words.vec");
  if (!words_os) throw ValidationError("synth: cannot write words.vec");
  for (int t = 0; t < topics; ++t) {
    for (int w = 0; w < topic_words; ++w) {
      std::string token = "t" + std::to_string(t) + "w" + fmt(w, 3);
      topic_vocab[t].push_back(token);
      Vec v = centroid[t];
      for (int d = 0; d < spec.word_dim; ++d) v[d] += gaussian(emb_rng, 0.0, 0.3);
      write_embedding(words_os, token, v);
    }
  }
  std::vector<std::string> shared_vocab;
  for (int w = 0; w < generic_words; ++w) {
    std::string token = "common" + fmt(w, 3);
    shared_vocab.push_back(token);
    Vec v(spec.word_dim);
    for (int d = 0; d < spec.word_dim; ++d) v[d] = gaussian(emb_rng, 0.0, 0.3);
    write_embedding(words_os, token, v);
  }

  // Entities: per group, one member per topic sharing the group surface.
  // Titles are identical within a group so string features cannot leak the
  // answer; every entity also owns a unique alias.
  struct Entity {
    std::string id, title, unique_alias, group_alias, description;
    long long pageview;
    int topic, group;
  };
  std::vector<Entity> entities;
  std::ofstream ents_os(out_dir / "entities.vec");
  if (!ents_os) throw ValidationError("synth: cannot write entities.vec");
  for (int g = 0; g < spec.groups_per_topic; ++g) {
    for (int t = 0; t < topics; ++t) {
      Entity e;
      e.topic = t;
      e.group = g;
      e.id = "ent_t" + std::to_string(t) + "_g" + fmt(g, 2);
      e.group_alias = "name" + fmt(g, 2);
      e.unique_alias = "uniq_t" + std::to_string(t) + "_g" + fmt(g, 2);
      e.title = e.group_alias;
      std::string desc;
      for (int w = 0; w < 24; ++w) {
        if (w) desc.push_back(' ');
        desc += topic_vocab[t][uniform_int(kb_rng, 0, topic_words - 1)];
      }
      e.description = desc;
      e.pageview = static_cast<long long>(std::pow(10.0, uniform_range(kb_rng, 3.0, 7.5)));
      Vec v = centroid[t].head(spec.entity_dim).eval();
      if (spec.entity_dim > spec.word_dim) {
        v = Vec::Zero(spec.entity_dim);
        v.head(spec.word_dim) = centroid[t];
      }
      for (int d = 0; d < spec.entity_dim; ++d) v[d] += gaussian(emb_rng, 0.0, 0.15);
      write_embedding(ents_os, e.id, v);
      entities.push_back(std::move(e));
    }
  }

  std::ofstream kb_os(out_dir / "kb.jsonl");
  if (!kb_os) throw ValidationError("synth: cannot write kb.jsonl");
  for (const auto& e : entities) {
    json j{{"entity_id", e.id},
           {"title", e.title},
           {"description", e.description},
           {"pageview", e.pageview},
           {"aliases", json::array({e.group_alias, e.unique_alias})}};
    kb_os << j.dump() << '\n';
  }

  // Documents: one topic each; every mention sits in a 15-token block with 7
  // filler words before and 7 after. A per-mention coin at the coherence
  // strength decides whether its fillers are topical or from the shared pool.
  auto entity_at = [&](int topic, int group) -> const Entity& {
    return entities[static_cast<std::size_t>(group) * topics + topic];
  };

  std::ofstream corpus_os(out_dir / "corpus.jsonl");
  if (!corpus_os) throw ValidationError("synth: cannot write corpus.jsonl");
  int mention_total = 0;
  for (int d = 0; d < spec.num_docs; ++d) {
    const int topic = uniform_int(doc_rng, 0, topics - 1);
    std::vector<std::string> tokens;
    json mentions = json::array();
    for (int m = 0; m < spec.mentions_per_doc; ++m) {
      const int group = uniform_int(doc_rng, 0, spec.groups_per_topic - 1);
      const Entity& gold = entity_at(topic, group);
      const bool ambiguous = uniform_double(doc_rng) < spec.ambiguity;
      const bool coherent = uniform_double(doc_rng) < spec.coherence;
      auto filler = [&]() -> const std::string& {
        if (coherent) return topic_vocab[topic][uniform_int(doc_rng, 0, topic_words - 1)];
        return shared_vocab[uniform_int(doc_rng, 0, generic_words - 1)];
      };
      for (int w = 0; w < 7; ++w) tokens.push_back(filler());
      const int position = static_cast<int>(tokens.size());
      tokens.push_back(ambiguous ? gold.group_alias : gold.unique_alias);
      for (int w = 0; w < 7; ++w) tokens.push_back(filler());
      mentions.push_back({{"mention_id", "d" + fmt(d, 4) + "_m" + std::to_string(m)},
                          {"surface", ambiguous ? gold.group_alias : gold.unique_alias},
                          {"position", position},
                          {"gold", gold.id}});
      ++mention_total;
    }
    json j{{"doc_id", "d" + fmt(d, 4)}, {"tokens", tokens}, {"mentions", mentions}};
    corpus_os << j.dump() << '\n';
  }

  // A ready-to-run config sized for the fixture. Paths are relative to the
  // config file so the whole directory relocates cleanly.
  RunConfig config;
  config.corpus_path = "corpus.jsonl";
  config.kb_path = "kb.jsonl";
  config.word_embeddings_path = "words.vec";
  config.entity_embeddings_path = "entities.vec";
  config.out_dir = ".";
  config.word_dim = spec.word_dim;
  config.entity_dim = spec.entity_dim;
  config.top_k = spec.k;
  config.local_hidden = 32;
  config.local_mlp_hidden = 32;
  config.local_epochs = 30;
  config.global_hidden = 32;
  config.global_epochs = 10;
  config.policy_hidden = 64;
  config.rl_epochs = 150;
  config.seed = spec.seed;
  save_config(out_dir / "config.json", config);

  SynthResult result;
  result.corpus_path = out_dir / "corpus.jsonl";
  result.kb_path = out_dir / "kb.jsonl";
  result.word_embeddings_path = out_dir / "words.vec";
  result.entity_embeddings_path = out_dir / "entities.vec";
  result.config_path = out_dir / "config.json";
  result.entities = static_cast<int>(entities.size());
  result.mentions = mention_total;
  return result;
}

}  // namespace seqlink::synth
