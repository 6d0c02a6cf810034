#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "seqlink/config.hpp"
#include "seqlink/corpus.hpp"

namespace seqlink::pipeline {

enum class Stage {
  kBuildKb,
  kGenCandidates,
  kPretrainLocal,
  kPretrainGlobal,
  kTrainRl,
  kLink,
  kEval,
  kAblate,
};

Stage parse_stage(const std::string& name);  // throws ConfigError on unknown names
std::string stage_name(Stage stage);

// Artifact filenames inside out_dir.
inline constexpr const char* kKbArtifact = "kb_processed.jsonl";
inline constexpr const char* kCandidatesArtifact = "candidates.jsonl";
inline constexpr const char* kRecallArtifact = "recall.csv";
inline constexpr const char* kLocalCheckpoint = "local.ckpt";
inline constexpr const char* kPsiArtifact = "psi.jsonl";
inline constexpr const char* kLocalLossArtifact = "local_loss.csv";
inline constexpr const char* kGlobalCheckpoint = "global.ckpt";
inline constexpr const char* kGlobalLossArtifact = "global_loss.csv";
inline constexpr const char* kPolicyCheckpoint = "policy.ckpt";
inline constexpr const char* kGlobalJointCheckpoint = "global_joint.ckpt";
inline constexpr const char* kTelemetryArtifact = "telemetry.csv";
inline constexpr const char* kPredictionsArtifact = "predictions.jsonl";
inline constexpr const char* kMetricsArtifact = "metrics.csv";
inline constexpr const char* kBucketsArtifact = "pageview_buckets.csv";
inline constexpr const char* kAblationArtifact = "ablation.csv";

// Runs one stage end to end: dependency checks, work, artifact + manifest
// writes. `overrides` is echoed verbatim into the manifest. Throws
// DependencyError when an upstream manifest is missing or was produced
// under a different config hash.
void run_stage(Stage stage, const RunConfig& config,
               const std::map<std::string, std::string>& overrides = {});

// Seeded 80/20 split by document order shuffle.
struct Split {
  std::vector<corpus::Document> train;
  std::vector<corpus::Document> heldout;
};
Split split_documents(const std::vector<corpus::Document>& docs, double train_fraction,
                      std::uint64_t seed);

std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace seqlink::pipeline
