#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "codeepneat/coevolution.hpp"

namespace codeepneat {

// Invalid configuration; path names the offending field ("blueprints.elitism").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error((path.empty() ? std::string("config") : path) + ": " + message),
        path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class RunMode { codeepneat, deepneat };
std::string_view to_string(RunMode mode);

struct DistributedConfig {
  int max_retries = 2;
  double min_timeout = 30.0;
  double timeout_factor = 10.0;
  double heartbeat_timeout = 10.0;
  double registration_wait = 60.0;
};

struct EvolutionConfig {
  std::string preset;  // informational once resolved
  RunMode mode = RunMode::codeepneat;
  std::uint64_t seed = 0;
  int generations = 10;
  int checkpoint_every = 1;
  std::string output_dir = "codeepneat-run";
  HyperparameterSpace space;
  // CoDeepNEAT settings; assembly, budget and fitness_floor are shared with
  // DeepNEAT runs.
  CoevolutionConfig co;
  // DeepNEAT settings.
  ReproductionConfig population;
  MutationRates mutation;
  json evaluator = json::object();  // make_evaluator description
  DistributedConfig distributed;
};

// Config tree: a JSON object. "preset" names a built-in whose tree is used as
// the base; every other key overrides it (objects merge recursively). "seed"
// is mandatory. Throws ConfigError.
EvolutionConfig parse_config(const json& tree);
EvolutionConfig load_config_file(const std::string& path);

// Fully explicit tree; parse_config(config_to_json(c)) reproduces c.
json config_to_json(const EvolutionConfig& config);

// Built-in presets: cifar10, lstm-ptb, captioning, surrogate-demo, dense-demo.
std::vector<std::string> preset_names();
json preset_tree(const std::string& name);  // throws ConfigError for unknown names

// Spaces behind the presets.
HyperparameterSpace cifar10_space();
HyperparameterSpace lstm_ptb_space();
HyperparameterSpace captioning_space();
HyperparameterSpace surrogate_demo_space();
HyperparameterSpace dense_demo_space();

}  // namespace codeepneat
