#include "seqlink/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

#include "seqlink/errors.hpp"
#include "seqlink/rng.hpp"

namespace seqlink {

using nlohmann::json;

namespace {

json to_json(const RunConfig& c) {
  return json{{"corpus_path", c.corpus_path},
              {"kb_path", c.kb_path},
              {"word_embeddings_path", c.word_embeddings_path},
              {"entity_embeddings_path", c.entity_embeddings_path},
              {"out_dir", c.out_dir},
              {"context_window", c.context_window},
              {"keyword_budget", c.keyword_budget},
              {"top_k", c.top_k},
              {"word_dim", c.word_dim},
              {"entity_dim", c.entity_dim},
              {"rank_weights", c.rank_weights},
              {"local_hidden", c.local_hidden},
              {"local_mlp_hidden", c.local_mlp_hidden},
              {"local_batch", c.local_batch},
              {"local_epochs", c.local_epochs},
              {"margin", c.margin},
              {"global_hidden", c.global_hidden},
              {"global_batch", c.global_batch},
              {"global_epochs", c.global_epochs},
              {"policy_layers", c.policy_layers},
              {"policy_hidden", c.policy_hidden},
              {"feature_dim", c.feature_dim},
              {"sequence_length", c.sequence_length},
              {"rl_epochs", c.rl_epochs},
              {"clip_norm", c.clip_norm},
              {"reward_baseline", c.reward_baseline},
              {"rank_mentions", c.rank_mentions},
              {"use_global_encoding", c.use_global_encoding},
              {"learning_rate", c.learning_rate},
              {"keep_prob", c.keep_prob},
              {"train_fraction", c.train_fraction},
              {"eval_split", c.eval_split},
              {"ablation_lengths", c.ablation_lengths},
              {"seed", c.seed}};
}

void from_json(const json& j, RunConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("corpus_path", c.corpus_path);
  get("kb_path", c.kb_path);
  get("word_embeddings_path", c.word_embeddings_path);
  get("entity_embeddings_path", c.entity_embeddings_path);
  get("out_dir", c.out_dir);
  get("context_window", c.context_window);
  get("keyword_budget", c.keyword_budget);
  get("top_k", c.top_k);
  get("word_dim", c.word_dim);
  get("entity_dim", c.entity_dim);
  get("rank_weights", c.rank_weights);
  get("local_hidden", c.local_hidden);
  get("local_mlp_hidden", c.local_mlp_hidden);
  get("local_batch", c.local_batch);
  get("local_epochs", c.local_epochs);
  get("margin", c.margin);
  get("global_hidden", c.global_hidden);
  get("global_batch", c.global_batch);
  get("global_epochs", c.global_epochs);
  get("policy_layers", c.policy_layers);
  get("policy_hidden", c.policy_hidden);
  get("feature_dim", c.feature_dim);
  get("sequence_length", c.sequence_length);
  get("rl_epochs", c.rl_epochs);
  get("clip_norm", c.clip_norm);
  get("reward_baseline", c.reward_baseline);
  get("rank_mentions", c.rank_mentions);
  get("use_global_encoding", c.use_global_encoding);
  get("learning_rate", c.learning_rate);
  get("keep_prob", c.keep_prob);
  get("train_fraction", c.train_fraction);
  get("eval_split", c.eval_split);
  get("ablation_lengths", c.ablation_lengths);
  get("seed", c.seed);

  static const std::set<std::string> known = {
      "corpus_path",     "kb_path",        "word_embeddings_path",
      "entity_embeddings_path", "out_dir", "context_window",
      "keyword_budget",  "top_k",          "word_dim",
      "entity_dim",      "rank_weights",   "local_hidden",
      "local_mlp_hidden", "local_batch",   "local_epochs",
      "margin",          "global_hidden",  "global_batch",
      "global_epochs",   "policy_layers",  "policy_hidden",
      "feature_dim",     "sequence_length", "rl_epochs",
      "clip_norm",       "reward_baseline", "rank_mentions",
      "use_global_encoding", "learning_rate", "keep_prob",
      "train_fraction",  "eval_split",     "ablation_lengths",
      "seed"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  RunConfig c;
  from_json(j, c);

  // Relative paths resolve against the config file's directory, so a
  // generated fixture directory relocates as a unit.
  auto resolve = [&](std::string& field) {
    if (field.empty()) return;
    std::filesystem::path p(field);
    if (p.is_relative()) field = (path.parent_path() / p).lexically_normal().string();
  };
  resolve(c.corpus_path);
  resolve(c.kb_path);
  resolve(c.word_embeddings_path);
  resolve(c.entity_embeddings_path);
  resolve(c.out_dir);

  validate(c);
  return c;
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream os(path);
  if (!os) throw ConfigError("config: cannot open for writing " + path.string());
  os << to_json(config).dump(2) << '\n';
}

std::string config_to_json(const RunConfig& config) { return to_json(config).dump(2); }

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
  json patch;
  try {
    patch[key] = json::parse(value);
  } catch (const json::exception&) {
    patch[key] = value;  // bare strings are allowed unquoted
  }
  try {
    from_json(patch, config);
  } catch (const json::exception& e) {
    throw ConfigError("config: override " + key + "=" + value + ": " + e.what());
  }
}

std::uint64_t config_hash(const RunConfig& config) {
  json j = to_json(config);
  j.erase("out_dir");
  return fnv1a64(j.dump());
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("config: ") + what);
  };
  require(c.context_window >= 1, "context_window must be >= 1");
  require(c.keyword_budget >= 1, "keyword_budget must be >= 1");
  require(c.top_k >= 1, "top_k must be >= 1");
  require(c.word_dim >= 1 && c.entity_dim >= 1, "embedding dims must be >= 1");
  require(c.rank_weights.size() == 5, "rank_weights must have 5 entries");
  require(c.local_hidden >= 1 && c.global_hidden >= 1, "hidden sizes must be >= 1");
  require(c.margin > 0.0, "margin must be positive");
  require(c.policy_layers >= 1, "policy_layers must be >= 1");
  require(c.feature_dim >= 1, "feature_dim must be >= 1");
  require(c.sequence_length >= 1, "sequence_length must be >= 1");
  require(c.keep_prob > 0.0 && c.keep_prob <= 1.0, "keep_prob must be in (0, 1]");
  require(c.train_fraction > 0.0 && c.train_fraction <= 1.0,
          "train_fraction must be in (0, 1]");
  require(c.eval_split == "heldout" || c.eval_split == "train" || c.eval_split == "all",
          "eval_split must be heldout, train or all");
  for (int len : c.ablation_lengths)
    require(len >= 1, "ablation_lengths entries must be >= 1");
}

}  // namespace seqlink
