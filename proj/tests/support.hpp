#pragma once

#include <set>
#include <vector>

#include "codeepneat/genome.hpp"
#include "codeepneat/speciation.hpp"

namespace support {

using namespace codeepneat;

// Every parameter kind, plus a layer-kind switch between dense and lstm.
inline HyperparameterSpace mixed_space() {
  using S = HyperparameterSpec;
  return HyperparameterSpace::make(
      {
          S::categorical("layer_type", {std::string("dense"), std::string("lstm")}),
          S::integer("layer_size", 8, 64),
          S::real("dropout_rate", 0.0, 0.5),
          S::binary("use_bias"),
      },
      {
          S::real("learning_rate", 0.001, 0.1),
          S::binary("nesterov"),
      },
      "layer_type", "dense");
}

inline HyperparameterSpace lstm_space() {
  using S = HyperparameterSpec;
  return HyperparameterSpace::make({S::categorical("layer_type", {std::string("lstm")}),
                                    S::integer("layer_size", 8, 32)},
                                   {}, "layer_type", "lstm");
}

// Random structural growth from the minimal chromosome.
inline ModuleChromosome grow_module(const HyperparameterSpace& space, InnovationRegistry& registry,
                                    Rng& rng, int steps) {
  auto c = minimal_chromosome(space, rng);
  for (int i = 0; i < steps; ++i) {
    const double u = rng.uniform();
    if (u < 0.4)
      c = mutate_add_node(c, space, registry, rng).chromosome;
    else if (u < 0.75)
      c = mutate_add_edge(c, registry, rng).chromosome;
    else if (u < 0.9)
      c = toggle_layer_connection(c, rng).chromosome;
    else
      c = mutate_parameters(c, 0.5, 0.5, rng);
  }
  return c;
}

inline BlueprintChromosome grow_blueprint(const HyperparameterSpace& space,
                                          const std::vector<SpeciesId>& live,
                                          InnovationRegistry& registry, Rng& rng, int steps) {
  auto c = minimal_blueprint(space, live, rng);
  for (int i = 0; i < steps; ++i) {
    const double u = rng.uniform();
    if (u < 0.45)
      c = mutate_add_node(c, live, registry, rng).chromosome;
    else if (u < 0.8)
      c = mutate_add_edge(c, registry, rng).chromosome;
    else if (u < 0.9)
      c = toggle_layer_connection(c, rng).chromosome;
    else
      c = mutate_species_pointers(c, live, 0.5, rng);
  }
  return c;
}

template <class C>
std::set<InnovationId> gene_ids(const C& c) {
  std::set<InnovationId> out;
  for (const auto& n : c.nodes) out.insert(n.innovation);
  for (const auto& e : c.edges) out.insert(e.innovation);
  return out;
}

}  // namespace support
