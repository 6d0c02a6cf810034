// seqlink: sequential entity linking pipeline driver.
//
// Every stage is a subcommand fed by one declarative config file; `synth`
// generates a self-contained fixture directory (corpus, KB, embeddings and a
// ready config).

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "seqlink/config.hpp"
#include "seqlink/errors.hpp"
#include "seqlink/pipeline.hpp"
#include "seqlink/synth.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDependency = 3;

struct StageArgs {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  std::vector<std::string> overrides;
};

int run_pipeline_stage(const std::string& stage_name, const StageArgs& args) {
  auto config = seqlink::load_config(args.config_path);
  std::map<std::string, std::string> echoed;
  for (const auto& kv : args.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw seqlink::ConfigError("--set expects key=value, got: " + kv);
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    seqlink::apply_override(config, key, value);
    echoed[key] = value;
  }
  if (args.seed >= 0) {
    config.seed = static_cast<std::uint64_t>(args.seed);
    echoed["seed"] = std::to_string(args.seed);
  }
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  seqlink::pipeline::run_stage(seqlink::pipeline::parse_stage(stage_name), config, echoed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqlink: joint entity linking via sequential policy decisions"};
  app.require_subcommand(1);

  seqlink::synth::SyntheticSpec spec;
  std::string synth_out = "fixture";
  auto* synth = app.add_subcommand("synth", "generate a synthetic fixture directory");
  synth->add_option("--docs", spec.num_docs, "number of documents");
  synth->add_option("--mentions-per-doc", spec.mentions_per_doc, "mentions per document");
  synth->add_option("--k", spec.k, "candidates per ambiguous surface");
  synth->add_option("--vocab", spec.vocab_size, "vocabulary size");
  synth->add_option("--coherence", spec.coherence, "per-mention topical context probability");
  synth->add_option("--ambiguity", spec.ambiguity, "fraction of ambiguous mentions");
  synth->add_option("--groups", spec.groups_per_topic, "entity groups per topic");
  synth->add_option("--word-dim", spec.word_dim, "word embedding dimension");
  synth->add_option("--entity-dim", spec.entity_dim, "entity embedding dimension");
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  const std::vector<std::string> stages = {"build-kb",        "gen-candidates",
                                           "pretrain-local",  "pretrain-global",
                                           "train-rl",        "link",
                                           "eval",            "ablate"};
  std::map<std::string, StageArgs> stage_args;
  for (const auto& name : stages) {
    auto* cmd = app.add_subcommand(name, "run the " + name + " stage");
    auto& args = stage_args[name];
    cmd->add_option("--config", args.config_path, "run configuration file")->required();
    cmd->add_option("--out", args.out_dir, "override the output directory");
    cmd->add_option("--seed", args.seed, "override the seed");
    cmd->add_option("--set", args.overrides, "override a config key (key=value)")
        ->take_all();
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      auto result = seqlink::synth::generate(spec, synth_out);
      std::cout << "synth: wrote " << result.entities << " entities and " << result.mentions
                << " mentions under " << synth_out << "\n"
                << "synth: run stages with --config " << result.config_path.string() << "\n";
      return 0;
    }
    for (const auto& name : stages) {
      if (app.get_subcommand(name)->parsed()) return run_pipeline_stage(name, stage_args[name]);
    }
  } catch (const seqlink::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << "\n";
    return kExitDependency;
  } catch (const seqlink::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const seqlink::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const seqlink::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
