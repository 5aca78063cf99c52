#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "codeepneat/rng.hpp"

namespace codeepneat {

using json = nlohmann::json;

// A concrete hyperparameter value. Categorical choices may be numbers or
// strings (e.g. kernel size {1, 3} vs. weight init {glorot_normal, he_normal}).
using ParamValue = std::variant<double, std::int64_t, bool, std::string>;

// Name -> value without a schema attached; used where tables leave the
// genome (assembled networks, the JSON interchange format).
using ParamMap = std::map<std::string, ParamValue>;

enum class ParamKind { real, integer, binary, categorical };

std::string_view to_string(ParamKind kind);
ParamKind param_kind_from_string(std::string_view text);

// Genomes built from different schemas cannot be recombined or compared.
class IncompatibleGenomes : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct HyperparameterSpec {
  std::string name;
  ParamKind kind = ParamKind::real;
  double lower = 0.0;              // real / integer
  double upper = 0.0;              // real / integer
  std::vector<ParamValue> choices;  // categorical
  double sigma_fraction = 0.1;     // Gaussian step as a fraction of range width

  static HyperparameterSpec real(std::string name, double lo, double hi, double sigma = 0.1);
  static HyperparameterSpec integer(std::string name, std::int64_t lo, std::int64_t hi,
                                    double sigma = 0.1);
  static HyperparameterSpec binary(std::string name);
  static HyperparameterSpec categorical(std::string name, std::vector<ParamValue> choices);

  double width() const { return upper - lower; }
  bool contains(const ParamValue& value) const;
  void validate() const;  // throws std::invalid_argument

  friend bool operator==(const HyperparameterSpec&, const HyperparameterSpec&) = default;
};

class ParamSchema {
 public:
  ParamSchema() = default;
  explicit ParamSchema(std::vector<HyperparameterSpec> specs, std::string layer_kind_param = {},
                       std::string default_layer_kind = "dense");

  const std::vector<HyperparameterSpec>& specs() const { return specs_; }
  std::size_t size() const { return specs_.size(); }
  bool empty() const { return specs_.empty(); }
  const HyperparameterSpec& operator[](std::size_t i) const { return specs_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;
  const HyperparameterSpec* spec(std::string_view name) const;

  // Node schemas decide the layer kind of a gene: the string value of
  // layer_kind_param when set, default_layer_kind otherwise.
  const std::string& layer_kind_param() const { return layer_kind_param_; }
  const std::string& default_layer_kind() const { return default_layer_kind_; }

  friend bool operator==(const ParamSchema&, const ParamSchema&) = default;

 private:
  std::vector<HyperparameterSpec> specs_;
  std::string layer_kind_param_;
  std::string default_layer_kind_ = "dense";
};

using SchemaPtr = std::shared_ptr<const ParamSchema>;

SchemaPtr make_schema(std::vector<HyperparameterSpec> specs, std::string layer_kind_param = {},
                      std::string default_layer_kind = "dense");
const SchemaPtr& empty_schema();

// Node-level and global hyperparameters. Layer kind is read from the node
// parameter named by layer_kind_param when set, otherwise every node uses
// default_layer_kind.
struct HyperparameterSpace {
  SchemaPtr node = empty_schema();
  SchemaPtr global = empty_schema();
  std::string layer_kind_param;
  std::string default_layer_kind = "dense";

  static HyperparameterSpace make(std::vector<HyperparameterSpec> node_params,
                                  std::vector<HyperparameterSpec> global_params,
                                  std::string layer_kind_param = {},
                                  std::string default_layer_kind = "dense");

  // Same node part, no global part. Module populations use this when the
  // blueprint carries the global table.
  HyperparameterSpace without_globals() const;

  friend bool operator==(const HyperparameterSpace& a, const HyperparameterSpace& b);
};

class HyperparameterTable {
 public:
  HyperparameterTable();
  HyperparameterTable(SchemaPtr schema, std::vector<ParamValue> values);

  const ParamSchema& schema() const { return *schema_; }
  const SchemaPtr& schema_ptr() const { return schema_; }
  std::span<const ParamValue> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  const ParamValue& at(std::string_view name) const;
  const ParamValue* find(std::string_view name) const;

  bool same_schema(const HyperparameterTable& other) const;
  ParamMap to_map() const;

  friend bool operator==(const HyperparameterTable& a, const HyperparameterTable& b);

 private:
  SchemaPtr schema_;
  std::vector<ParamValue> values_;
};

HyperparameterTable sample_table(const SchemaPtr& schema, Rng& rng);

HyperparameterTable mutate_table(const HyperparameterTable& table, double per_param_rate, Rng& rng);

// Applies one mutation step to a single value; real/integer use the given
// noise draw (already scaled) so tests can force the perturbation.
ParamValue perturb_value(const HyperparameterSpec& spec, const ParamValue& value, double noise);
ParamValue mutate_value(const HyperparameterSpec& spec, const ParamValue& value, Rng& rng);

HyperparameterTable crossover_tables(const HyperparameterTable& a, const HyperparameterTable& b,
                                     Rng& rng);
// pick_b[i] selects parameter i from b.
HyperparameterTable crossover_tables(const HyperparameterTable& a, const HyperparameterTable& b,
                                     std::span<const bool> pick_b);

double table_distance(const HyperparameterTable& a, const HyperparameterTable& b);

// Layer kind selected by a node table (see ParamSchema).
std::string layer_kind_of(const HyperparameterTable& node_params);

// Numeric view of a value: bools map to 0/1, strings throw.
double as_number(const ParamValue& value);
std::string to_string(const ParamValue& value);

json to_json(const ParamValue& value);
ParamValue param_value_from_json(const json& j);
json to_json(const ParamMap& map);
ParamMap param_map_from_json(const json& j);
json to_json(const HyperparameterSpec& spec);
HyperparameterSpec spec_from_json(const json& j);
json to_json(const HyperparameterSpace& space);
HyperparameterSpace space_from_json(const json& j);
json to_json(const HyperparameterTable& table);
HyperparameterTable table_from_json(const json& j, const SchemaPtr& schema);

}  // namespace codeepneat
