#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "codeepneat/hyperparams.hpp"
#include "codeepneat/rng.hpp"

namespace codeepneat {

using InnovationId = std::uint64_t;
using SpeciesId = std::int64_t;
using GenomeId = std::uint64_t;

inline constexpr SpeciesId kNoSpecies = -1;

// Every minimal chromosome uses the same historical markings so that the
// initial population lines up gene for gene.
inline constexpr InnovationId kInputNodeId = 0;
inline constexpr InnovationId kOutputNodeId = 1;
inline constexpr InnovationId kSeedHiddenId = 2;
inline constexpr InnovationId kSeedInEdgeId = 3;
inline constexpr InnovationId kSeedOutEdgeId = 4;
inline constexpr InnovationId kFirstDynamicId = 5;

inline const std::string kLstmKind = "lstm";

enum class NodeRole { input, output, hidden };
enum class LinkKind { layer, cell_skip };

std::string_view to_string(NodeRole role);
std::string_view to_string(LinkKind kind);

struct ConnectionGene {
  InnovationId innovation = 0;
  InnovationId from = 0;
  InnovationId to = 0;
  bool enabled = true;
  LinkKind kind = LinkKind::layer;

  friend bool operator==(const ConnectionGene&, const ConnectionGene&) = default;
};

struct LayerGene {
  InnovationId innovation = 0;
  NodeRole role = NodeRole::hidden;
  std::string layer_kind;
  HyperparameterTable params;
  // Hidden genes are enabled exactly when they lie on an input->output path
  // of enabled layer edges; the operators keep this flag in sync.
  bool enabled = true;

  friend bool operator==(const LayerGene&, const LayerGene&) = default;
};

struct BlueprintNode {
  InnovationId innovation = 0;
  NodeRole role = NodeRole::hidden;
  SpeciesId species = kNoSpecies;
  bool enabled = true;

  friend bool operator==(const BlueprintNode&, const BlueprintNode&) = default;
};

// Nodes and edges are kept sorted by innovation id.
struct ModuleChromosome {
  GenomeId id = 0;
  std::vector<LayerGene> nodes;
  std::vector<ConnectionGene> edges;
  HyperparameterTable globals;

  const LayerGene* node(InnovationId innovation) const;
  const ConnectionGene* edge(InnovationId innovation) const;

  friend bool operator==(const ModuleChromosome&, const ModuleChromosome&) = default;
};

struct BlueprintChromosome {
  GenomeId id = 0;
  std::vector<BlueprintNode> nodes;
  std::vector<ConnectionGene> edges;
  HyperparameterTable globals;

  const BlueprintNode* node(InnovationId innovation) const;
  const ConnectionGene* edge(InnovationId innovation) const;

  friend bool operator==(const BlueprintChromosome&, const BlueprintChromosome&) = default;
};

// Issues historical markings. Identical structural events within one
// generation receive identical ids; new_generation() forgets the cache.
// All methods are serialized through one mutex.
class InnovationRegistry {
 public:
  struct Split {
    InnovationId node;
    InnovationId in_edge;
    InnovationId out_edge;
  };

  explicit InnovationRegistry(InnovationId next = kFirstDynamicId) : next_(next) {}
  InnovationRegistry(const InnovationRegistry& other);
  InnovationRegistry& operator=(const InnovationRegistry& other);

  InnovationId edge(InnovationId from, InnovationId to, LinkKind kind);
  Split split(InnovationId edge);
  InnovationId fresh();
  void new_generation();
  InnovationId peek_next() const;

  json to_json() const;
  static InnovationRegistry from_json(const json& j);

 private:
  mutable std::mutex mutex_;
  InnovationId next_;
  std::map<std::tuple<InnovationId, InnovationId, int>, InnovationId> edges_;
  std::map<InnovationId, Split> splits_;
};

// Result of a structural operator. applied == false means the operator found
// nothing legal to do and chromosome is the unchanged input.
template <class Chromosome>
struct Mutation {
  Chromosome chromosome;
  bool applied = false;
};

struct CompatibilityCoefficients {
  double excess = 1.0;
  double disjoint = 1.0;
  double params = 0.4;
};

// Gene partition produced by lining up two chromosomes by innovation id.
// Node and edge ids share one counter, so they are aligned together.
struct GeneAlignment {
  std::vector<InnovationId> matched;
  std::vector<InnovationId> disjoint_a;
  std::vector<InnovationId> disjoint_b;
  std::vector<InnovationId> excess_a;
  std::vector<InnovationId> excess_b;

  friend bool operator==(const GeneAlignment&, const GeneAlignment&) = default;
};

// --- construction -----------------------------------------------------------

ModuleChromosome minimal_chromosome(const HyperparameterSpace& space, Rng& rng);
BlueprintChromosome minimal_blueprint(const HyperparameterSpace& space,
                                      std::span<const SpeciesId> live_species, Rng& rng);

// --- structural mutation ----------------------------------------------------

Mutation<ModuleChromosome> mutate_add_node(const ModuleChromosome& c,
                                           const HyperparameterSpace& space,
                                           InnovationRegistry& registry, Rng& rng);
Mutation<BlueprintChromosome> mutate_add_node(const BlueprintChromosome& c,
                                              std::span<const SpeciesId> live_species,
                                              InnovationRegistry& registry, Rng& rng);

Mutation<ModuleChromosome> split_edge(const ModuleChromosome& c, InnovationId edge,
                                      const HyperparameterSpace& space,
                                      InnovationRegistry& registry, Rng& rng);
Mutation<BlueprintChromosome> split_edge(const BlueprintChromosome& c, InnovationId edge,
                                         SpeciesId species, InnovationRegistry& registry);

Mutation<ModuleChromosome> mutate_add_edge(const ModuleChromosome& c,
                                           InnovationRegistry& registry, Rng& rng);
Mutation<BlueprintChromosome> mutate_add_edge(const BlueprintChromosome& c,
                                              InnovationRegistry& registry, Rng& rng);
Mutation<ModuleChromosome> add_edge(const ModuleChromosome& c, InnovationId from,
                                    InnovationId to, InnovationRegistry& registry);
Mutation<BlueprintChromosome> add_edge(const BlueprintChromosome& c, InnovationId from,
                                       InnovationId to, InnovationRegistry& registry);

Mutation<ModuleChromosome> toggle_layer_connection(const ModuleChromosome& c, Rng& rng);
Mutation<BlueprintChromosome> toggle_layer_connection(const BlueprintChromosome& c, Rng& rng);
Mutation<ModuleChromosome> toggle_edge(const ModuleChromosome& c, InnovationId edge);
Mutation<BlueprintChromosome> toggle_edge(const BlueprintChromosome& c, InnovationId edge);

// Adds (probability 1/2, or force_add) or removes a cell_skip edge between
// two lstm nodes. Throws std::invalid_argument with fewer than two lstm nodes.
Mutation<ModuleChromosome> mutate_skip_connection(const ModuleChromosome& c,
                                                  InnovationRegistry& registry, Rng& rng,
                                                  std::optional<bool> force_add = std::nullopt);
Mutation<ModuleChromosome> add_skip(const ModuleChromosome& c, InnovationId from,
                                    InnovationId to, InnovationRegistry& registry);
Mutation<ModuleChromosome> remove_skip(const ModuleChromosome& c, InnovationId edge);

std::size_t count_active_lstm(const ModuleChromosome& c);

// Per-node and global table mutation; keeps layer kinds and cell_skip
// validity in sync with the new tables.
ModuleChromosome mutate_parameters(const ModuleChromosome& c, double table_rate,
                                   double per_param_rate, Rng& rng);
BlueprintChromosome mutate_globals(const BlueprintChromosome& c, double table_rate,
                                   double per_param_rate, Rng& rng);
BlueprintChromosome mutate_species_pointers(const BlueprintChromosome& c,
                                            std::span<const SpeciesId> live_species, double rate,
                                            Rng& rng);

// --- recombination and distance ---------------------------------------------

GeneAlignment align_genes(const ModuleChromosome& a, const ModuleChromosome& b);
GeneAlignment align_genes(const BlueprintChromosome& a, const BlueprintChromosome& b);

// Throws IncompatibleGenomes when the parents were built from different spaces.
ModuleChromosome crossover(const ModuleChromosome& a, const ModuleChromosome& b, double fitness_a,
                           double fitness_b, Rng& rng);
BlueprintChromosome crossover(const BlueprintChromosome& a, const BlueprintChromosome& b,
                              double fitness_a, double fitness_b, Rng& rng);

double compatibility_distance(const ModuleChromosome& a, const ModuleChromosome& b,
                              const CompatibilityCoefficients& coeffs);
double compatibility_distance(const BlueprintChromosome& a, const BlueprintChromosome& b,
                              const CompatibilityCoefficients& coeffs);

// --- checking and serialization ---------------------------------------------

// Empty result means every graph invariant holds.
std::vector<std::string> check_invariants(const ModuleChromosome& c);
std::vector<std::string> check_invariants(const BlueprintChromosome& c);

// Hidden node ids on some input->output path of enabled layer edges.
std::vector<InnovationId> active_hidden_nodes(const ModuleChromosome& c);
std::vector<InnovationId> active_hidden_nodes(const BlueprintChromosome& c);

json to_json(const ModuleChromosome& c);
ModuleChromosome module_from_json(const json& j, const HyperparameterSpace& space);
json to_json(const BlueprintChromosome& c);
BlueprintChromosome blueprint_from_json(const json& j, const HyperparameterSpace& space);

}  // namespace codeepneat
