#pragma once

#include <map>
#include <optional>
#include <vector>

#include "codeepneat/assembly.hpp"
#include "codeepneat/evaluator.hpp"
#include "codeepneat/speciation.hpp"

namespace codeepneat {

struct AssemblyRecord {
  std::uint64_t network_id = 0;
  GenomeId blueprint_id = 0;
  std::map<SpeciesId, GenomeId> module_choice;
  std::optional<double> fitness;
  bool failed = false;

  friend bool operator==(const AssemblyRecord&, const AssemblyRecord&) = default;
};

json to_json(const AssemblyRecord& record);
AssemblyRecord assembly_record_from_json(const json& j);

// Blueprints carry the global hyperparameter table; modules use the node part
// only. Each population has its own innovation registry.
struct CoPopulations {
  Population<BlueprintChromosome> blueprints;
  Population<ModuleChromosome> modules;
  InnovationRegistry blueprint_registry;
  InnovationRegistry module_registry;
  std::uint64_t next_network_id = 1;
};

struct CoevolutionConfig {
  std::size_t assembly_count = 100;
  ReproductionConfig blueprints;
  ReproductionConfig modules;
  MutationRates blueprint_rates;
  MutationRates module_rates;
  AssemblyOptions assembly;
  EvaluationBudget budget;  // seed is replaced per network
  std::uint64_t evaluation_seed = 0;
  double fitness_floor = 0.0;
};

CoPopulations initialize_copopulations(const HyperparameterSpace& space,
                                       const CoevolutionConfig& config, Rng& rng);

// Re-points every species pointer that refers to a dead module species to a
// uniformly chosen live one. Returns the number of pointers changed.
std::size_t repair_species_pointers(CoPopulations& co, Rng& rng);

// Round-robin blueprint draws over the population (species order, then member
// order); one uniformly chosen module per distinct species pointer of the
// blueprint's active nodes. Repairs dangling pointers first.
std::vector<AssemblyRecord> sample_assemblies(CoPopulations& co, std::size_t count, Rng& rng);

struct Attribution {
  std::map<GenomeId, double> blueprints;
  std::map<GenomeId, double> modules;
};

// Mean fitness of the records containing each blueprint / module, summed with
// Neumaier compensation. Throws on an empty list or a record without fitness.
Attribution attribute_fitness(const std::vector<AssemblyRecord>& records);

// Completes a fitness map for every member of the population: members that
// were never evaluated take their species' mean attributed fitness, then the
// population mean, then floor.
FitnessMap fill_unevaluated(const Population<ModuleChromosome>& modules,
                            const std::map<GenomeId, double>& attributed, double floor);
FitnessMap fill_unevaluated(const Population<BlueprintChromosome>& blueprints,
                            const std::map<GenomeId, double>& attributed, double floor);

// Builds the network for a record from the current populations.
AssembledNetwork assemble_record(const CoPopulations& co, const AssemblyRecord& record,
                                 const AssemblyOptions& options);

struct CoGenerationResult {
  int generation = 0;
  std::vector<AssemblyRecord> records;
  std::vector<FitnessReport> reports;
  std::size_t blueprint_species = 0;
  std::size_t module_species = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  std::uint64_t best_network_id = 0;
  std::optional<AssembledNetwork> best_network;
  std::size_t unevaluated_modules = 0;
};

// sample -> assemble -> evaluate -> attribute -> reproduce modules, then
// blueprints (pointer mutations draw from the new module species).
CoGenerationResult evolve_generation(CoPopulations& co, const HyperparameterSpace& space,
                                     const CoevolutionConfig& config, EvaluationBackend& backend,
                                     Rng& rng);

json to_json(const CoPopulations& co);
CoPopulations copopulations_from_json(const json& j, const HyperparameterSpace& space);

// Neumaier-compensated sum.
double compensated_sum(const std::vector<double>& values);

}  // namespace codeepneat
