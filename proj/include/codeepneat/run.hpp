#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "codeepneat/config.hpp"

namespace codeepneat {

struct GenerationLog {
  int generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  std::size_t blueprint_species = 0;  // DeepNEAT: species of the single population
  std::size_t module_species = 0;     // DeepNEAT: 0
  std::uint64_t best_network_id = 0;
  std::size_t evaluations = 0;
  std::size_t failures = 0;

  friend bool operator==(const GenerationLog&, const GenerationLog&) = default;
};

json to_json(const GenerationLog& log);
GenerationLog generation_log_from_json(const json& j);

struct BestNetwork {
  double fitness = 0.0;
  int generation = 0;
  AssembledNetwork network;
};

// Everything needed to continue a run. DeepNEAT runs use population,
// registry and next_network_id; CoDeepNEAT runs use co.
struct RunState {
  EvolutionConfig config;
  Rng rng;
  int generation = 0;  // completed generations
  CoPopulations co;
  Population<ModuleChromosome> population;
  InnovationRegistry registry;
  std::uint64_t next_network_id = 1;
  std::vector<GenerationLog> log;
  std::vector<AssemblyRecord> last_records;  // records of generation - 1
  std::optional<BestNetwork> best;           // best evaluated network so far
};

// Generation-0 populations drawn from config.seed.
RunState start_run(const EvolutionConfig& config);

// Runs one generation through backend and appends its log entry.
const GenerationLog& advance(RunState& state, EvaluationBackend& backend);

// Canonical checkpoint: the config without output_dir, populations,
// registries, rng state, logs, last records and best network.
json checkpoint_json(const RunState& state);
std::string checkpoint_text(const RunState& state);  // dump(2) plus newline
RunState load_checkpoint(const json& j);
RunState load_checkpoint_file(const std::filesystem::path& path);

// Network shown by `inspect best`: the best evaluated network, or before any
// evaluation the assembly of the first blueprint (or genome) with the first
// module of each referenced species.
AssembledNetwork best_or_initial_network(const RunState& state);

// Output layout under dir:
//   fitness.csv                 one row per finished generation
//   records/gen_NNNNN.jsonl     one assembly record per line
//   checkpoints/gen_NNNNN.json  state after NNNNN generations
//   checkpoint.json             latest checkpoint
//   best.dot, best.json         best network so far
class RunWriter {
 public:
  explicit RunWriter(std::filesystem::path dir);
  const std::filesystem::path& dir() const { return dir_; }
  void write_generation(const RunState& state) const;  // records, csv, best
  std::filesystem::path write_checkpoint(const RunState& state) const;
  void write_checkpoint_text(const std::string& text, int generation) const;

 private:
  std::filesystem::path dir_;
};

std::string records_filename(int generation);
std::string checkpoint_filename(int generation);

// Advances until state.generation == target, writing outputs. Checkpoints the
// initial state, every checkpoint_every generations and at the end. When a
// generation throws, the error propagates and the last checkpoint is left
// untouched.
void run_until(RunState& state, EvaluationBackend& backend, int target, const RunWriter& writer);

// Evaluator and backend wiring used by the CLI and tests.
EvaluatorPtr evaluator_for(const EvolutionConfig& config);

}  // namespace codeepneat
