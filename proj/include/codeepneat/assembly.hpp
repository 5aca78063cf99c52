#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "codeepneat/genome.hpp"

namespace codeepneat {

// Channels x height x width. Flat vectors use height = width = 1.
struct Shape {
  std::int64_t channels = 0;
  std::int64_t height = 1;
  std::int64_t width = 1;

  std::int64_t total() const { return channels * height * width; }
  bool spatial() const { return height > 1 || width > 1; }
  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

enum class MergeMethod { concatenate, element_wise_sum };
enum class Downsample { max_pool, dense_bottleneck };

std::string_view to_string(MergeMethod m);
std::string_view to_string(Downsample d);
MergeMethod merge_method_from_string(std::string_view s);
Downsample downsample_from_string(std::string_view s);

struct MergePolicy {
  MergeMethod method = MergeMethod::concatenate;
  Downsample downsample = Downsample::dense_bottleneck;

  friend bool operator==(const MergePolicy&, const MergePolicy&) = default;
};

struct AssemblyOptions {
  MergePolicy policy;
  Shape input_shape{16, 1, 1};
  std::int64_t output_units = 2;
};

// Layer kinds produced by assembly.
namespace kinds {
inline constexpr const char* input = "input";
inline constexpr const char* output = "output";
inline constexpr const char* dense = "dense";
inline constexpr const char* conv = "conv";
inline constexpr const char* lstm = "lstm";
inline constexpr const char* merge = "merge";
inline constexpr const char* max_pool = "max_pool";
inline constexpr const char* bottleneck = "bottleneck";
}  // namespace kinds

// Where a concrete layer came from. Layers inserted by assembly (merges,
// downsampling) carry no origin.
struct LayerOrigin {
  InnovationId blueprint_node = 0;
  GenomeId module_id = 0;
  InnovationId module_node = 0;

  friend bool operator==(const LayerOrigin&, const LayerOrigin&) = default;
};

struct ConcreteLayer {
  int id = 0;
  std::string kind;
  ParamMap params;
  Shape input_shape;
  Shape output_shape;
  std::optional<LayerOrigin> origin;

  friend bool operator==(const ConcreteLayer&, const ConcreteLayer&) = default;
};

struct Provenance {
  std::uint64_t network_id = 0;
  GenomeId blueprint_id = 0;
  std::map<SpeciesId, GenomeId> module_choice;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// Layers are numbered 0..n-1 in a canonical topological order (input first).
struct AssembledNetwork {
  std::vector<ConcreteLayer> layers;
  std::vector<std::pair<int, int>> edges;            // sorted
  std::vector<std::pair<int, int>> recurrent_edges;  // cell_skip links, sorted
  ParamMap globals;
  Provenance provenance;

  std::vector<int> parents(int layer) const;
  std::vector<int> children(int layer) const;

  friend bool operator==(const AssembledNetwork&, const AssembledNetwork&) = default;
};

class AssemblyError : public std::runtime_error {
 public:
  AssemblyError(const std::string& what, std::vector<InnovationId> nodes)
      : std::runtime_error(what), nodes_(std::move(nodes)) {}
  const std::vector<InnovationId>& nodes() const { return nodes_; }

 private:
  std::vector<InnovationId> nodes_;
};

// modules maps each species pointer of the blueprint's active nodes to the
// chosen module.
AssembledNetwork assemble(const BlueprintChromosome& blueprint,
                          const std::map<SpeciesId, const ModuleChromosome*>& modules,
                          const AssemblyOptions& options);

// DeepNEAT: the chromosome is the whole network.
AssembledNetwork assemble(const ModuleChromosome& chromosome, const AssemblyOptions& options);

// Output shape of one layer given the shapes of its parents (ascending id).
// Dense and lstm layers read "layer_size" (else "units"), conv layers
// "num_filters" and "max_pooling"; a missing size keeps the input width.
// Throws AssemblyError for unknown kinds or incompatible merge inputs.
Shape infer_shape(const std::string& kind, const ParamMap& params,
                  const std::vector<Shape>& parents);

// Recomputes every input/output shape in topological order.
void infer_sizes(AssembledNetwork& net);

// Empty result means the network satisfies every structural invariant:
// DAG, one input, one output, merges in front of every multi-parent layer,
// matching shapes on every edge, every layer on an input->output path.
std::vector<std::string> check_network(const AssembledNetwork& net);

// Number of distinct blueprint nodes whose copy of module_id contributed at
// least one layer.
std::map<GenomeId, std::size_t> module_copies(const AssembledNetwork& net);

std::string export_dot(const AssembledNetwork& net);
json to_json(const AssembledNetwork& net);
AssembledNetwork network_from_json(const json& j);
std::string export_json(const AssembledNetwork& net);  // canonical text, trailing newline

json to_json(const Shape& shape);
Shape shape_from_json(const json& j);

}  // namespace codeepneat
