#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace seqlink {

// One declarative config drives every pipeline stage. Defaults follow the
// published training setup; synthetic runs usually override the dimensions.
struct RunConfig {
  // paths
  std::string corpus_path;
  std::string kb_path;
  std::string word_embeddings_path;
  std::string entity_embeddings_path;
  std::string out_dir;

  // data preparation
  int context_window = 15;
  int keyword_budget = 15;
  int top_k = 5;
  int word_dim = 300;
  int entity_dim = 300;
  std::vector<double> rank_weights = {1.0, 1.0, 1.0, 1.0, 1.0};

  // local encoder
  int local_hidden = 512;
  int local_mlp_hidden = 256;
  int local_batch = 64;
  int local_epochs = 20;
  double margin = 0.1;

  // global encoder
  int global_hidden = 700;
  int global_batch = 16;
  int global_epochs = 10;

  // entity selector
  int policy_layers = 4;
  int policy_hidden = 256;
  int feature_dim = 50;
  int sequence_length = 4;
  int rl_epochs = 200;
  double clip_norm = 5.0;
  bool reward_baseline = false;
  bool rank_mentions = true;
  bool use_global_encoding = true;

  // shared optimization knobs
  double learning_rate = 1e-3;
  double keep_prob = 0.8;

  // splits and evaluation
  double train_fraction = 0.8;
  std::string eval_split = "heldout";  // heldout | train | all
  std::vector<int> ablation_lengths = {2, 3, 4, 5, 6};

  std::uint64_t seed = 42;
};

RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& config);
std::string config_to_json(const RunConfig& config);

// Applies "key=value" to the named field; values are parsed as JSON scalars
// (arrays included). Unknown keys raise ConfigError.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

// Hash over every field except out_dir; stages refuse to mix artifacts
// produced under different hashes.
std::uint64_t config_hash(const RunConfig& config);

void validate(const RunConfig& config);

}  // namespace seqlink
