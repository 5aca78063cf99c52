#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "codeepneat/genome.hpp"

namespace codeepneat {

using FitnessMap = std::map<GenomeId, double>;

template <class C>
struct Species {
  SpeciesId id = 0;
  C representative;
  std::vector<C> members;
  int staleness = 0;
  std::optional<double> best_fitness;

  friend bool operator==(const Species&, const Species&) = default;
};

template <class C>
struct Population {
  std::vector<Species<C>> species;  // ascending id
  int generation = 0;
  GenomeId next_genome_id = 1;
  SpeciesId next_species_id = 0;

  std::size_t size() const;
  std::vector<const C*> members() const;  // species order, then member order
  const C* find(GenomeId id) const;
  std::vector<SpeciesId> species_ids() const;
  std::optional<SpeciesId> species_of(GenomeId id) const;

  friend bool operator==(const Population&, const Population&) = default;
};

struct ReproductionConfig {
  std::size_t population_size = 30;
  double survival_fraction = 0.5;
  std::size_t elitism = 1;
  double crossover_rate = 0.75;
  int stale_limit = 15;
  double threshold = 0.6;
  CompatibilityCoefficients coefficients;
};

struct MutationRates {
  double add_node = 0.05;
  double add_edge = 0.1;
  double toggle_connection = 0.1;
  double skip_connection = 0.1;
  double table = 0.5;       // chance that a node (or the global table) is touched
  double per_param = 0.3;   // per-parameter chance once a table is touched
  double species_pointer = 0.1;
};

template <class C>
using Mutator = std::function<C(C, Rng&)>;

// Applies the configured operators in a fixed order: add node, add edge,
// toggle connection, skip connection (only with two or more lstm layers),
// table mutation.
ModuleChromosome mutate_module(ModuleChromosome c, const HyperparameterSpace& space,
                               InnovationRegistry& registry, const MutationRates& rates, Rng& rng);
// Blueprint variant: structural operators, global table, pointer re-sampling.
BlueprintChromosome mutate_blueprint(BlueprintChromosome c, std::span<const SpeciesId> live_species,
                                     InnovationRegistry& registry, const MutationRates& rates,
                                     Rng& rng);

// Each individual joins the first prior species (ascending id) whose
// representative is closer than threshold, then the species founded earlier in
// this call; otherwise it founds a new species. Prior species carry their
// staleness record; representatives are refreshed to the first member.
template <class C>
std::vector<Species<C>> speciate(std::vector<C> individuals, const std::vector<Species<C>>& prior,
                                 double threshold, const CompatibilityCoefficients& coefficients,
                                 SpeciesId& next_species_id);

struct SpeciesShare {
  SpeciesId id = 0;
  double mass = 0.0;  // adjusted fitness mass: member fitness / species size, summed
  bool eligible = true;
};

// Largest-remainder split of total proportional to mass over eligible
// species; every eligible species gets at least one slot. All-zero mass
// splits equally.
std::map<SpeciesId, std::size_t> allocate_offspring(std::span<const SpeciesShare> shares,
                                                   std::size_t total);

template <class C>
Population<C> initialize_population(std::size_t size, const std::function<C(Rng&)>& factory,
                                    const ReproductionConfig& config, Rng& rng);

template <class C>
Population<C> reproduce(const Population<C>& population, const FitnessMap& fitness,
                        const ReproductionConfig& config, const Mutator<C>& mutate,
                        InnovationRegistry& registry, Rng& rng);

struct GenerationStats {
  int generation = 0;
  std::size_t species_count = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  GenomeId best_id = 0;
};

template <class C>
GenerationStats summarize(const Population<C>& population, const FitnessMap& fitness);

// One DeepNEAT generation: score every member, record stats, reproduce.
template <class C>
struct DeepNeatStep {
  Population<C> next;
  FitnessMap fitness;
  GenerationStats stats;
};

template <class C>
DeepNeatStep<C> deepneat_generation(
    const Population<C>& population,
    const std::function<std::vector<double>(const std::vector<const C*>&)>& evaluate,
    const ReproductionConfig& config, const Mutator<C>& mutate, InnovationRegistry& registry,
    Rng& rng);

json to_json(const Population<ModuleChromosome>& population);
json to_json(const Population<BlueprintChromosome>& population);
Population<ModuleChromosome> module_population_from_json(const json& j,
                                                         const HyperparameterSpace& space);
Population<BlueprintChromosome> blueprint_population_from_json(const json& j,
                                                               const HyperparameterSpace& space);

}  // namespace codeepneat
