#include "codeepneat/hyperparams.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace codeepneat {

std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::real: return "real";
    case ParamKind::integer: return "integer";
    case ParamKind::binary: return "binary";
    case ParamKind::categorical: return "categorical";
  }
  return "real";
}

ParamKind param_kind_from_string(std::string_view text) {
  if (text == "real") return ParamKind::real;
  if (text == "integer") return ParamKind::integer;
  if (text == "binary") return ParamKind::binary;
  if (text == "categorical") return ParamKind::categorical;
  throw std::invalid_argument("unknown hyperparameter kind '" + std::string(text) + "'");
}

HyperparameterSpec HyperparameterSpec::real(std::string name, double lo, double hi, double sigma) {
  HyperparameterSpec s{std::move(name), ParamKind::real, lo, hi, {}, sigma};
  s.validate();
  return s;
}

HyperparameterSpec HyperparameterSpec::integer(std::string name, std::int64_t lo, std::int64_t hi,
                                               double sigma) {
  HyperparameterSpec s{std::move(name), ParamKind::integer, static_cast<double>(lo),
                       static_cast<double>(hi), {}, sigma};
  s.validate();
  return s;
}

HyperparameterSpec HyperparameterSpec::binary(std::string name) {
  HyperparameterSpec s{std::move(name), ParamKind::binary, 0.0, 1.0, {}, 0.1};
  s.validate();
  return s;
}

HyperparameterSpec HyperparameterSpec::categorical(std::string name,
                                                   std::vector<ParamValue> choices) {
  HyperparameterSpec s{std::move(name), ParamKind::categorical, 0.0, 0.0, std::move(choices), 0.1};
  s.validate();
  return s;
}

bool HyperparameterSpec::contains(const ParamValue& value) const {
  switch (kind) {
    case ParamKind::real: {
      const auto* v = std::get_if<double>(&value);
      return v != nullptr && std::isfinite(*v) && *v >= lower && *v <= upper;
    }
    case ParamKind::integer: {
      const auto* v = std::get_if<std::int64_t>(&value);
      return v != nullptr && static_cast<double>(*v) >= lower && static_cast<double>(*v) <= upper;
    }
    case ParamKind::binary: return std::holds_alternative<bool>(value);
    case ParamKind::categorical:
      return std::find(choices.begin(), choices.end(), value) != choices.end();
  }
  return false;
}

void HyperparameterSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("hyperparameter with empty name");
  switch (kind) {
    case ParamKind::real:
    case ParamKind::integer:
      if (!std::isfinite(lower) || !std::isfinite(upper) || lower > upper)
        throw std::invalid_argument("hyperparameter '" + name + "': invalid range");
      if (kind == ParamKind::integer &&
          (std::floor(lower) != lower || std::floor(upper) != upper))
        throw std::invalid_argument("hyperparameter '" + name + "': integer bounds required");
      if (!(sigma_fraction > 0.0 && sigma_fraction <= 1.0))
        throw std::invalid_argument("hyperparameter '" + name + "': sigma must lie in (0, 1]");
      break;
    case ParamKind::binary: break;
    case ParamKind::categorical:
      if (choices.empty())
        throw std::invalid_argument("hyperparameter '" + name + "': empty choice list");
      for (std::size_t i = 0; i < choices.size(); ++i)
        for (std::size_t j = i + 1; j < choices.size(); ++j)
          if (choices[i] == choices[j])
            throw std::invalid_argument("hyperparameter '" + name + "': duplicate choice");
      break;
  }
}

ParamSchema::ParamSchema(std::vector<HyperparameterSpec> specs, std::string layer_kind_param,
                         std::string default_layer_kind)
    : specs_(std::move(specs)),
      layer_kind_param_(std::move(layer_kind_param)),
      default_layer_kind_(std::move(default_layer_kind)) {
  std::set<std::string> names;
  for (const auto& s : specs_) {
    s.validate();
    if (!names.insert(s.name).second)
      throw std::invalid_argument("duplicate hyperparameter name '" + s.name + "'");
  }
  if (default_layer_kind_.empty()) throw std::invalid_argument("default layer kind is empty");
  if (!layer_kind_param_.empty()) {
    const auto* s = spec(layer_kind_param_);
    if (s == nullptr || s->kind != ParamKind::categorical)
      throw std::invalid_argument("layer kind parameter '" + layer_kind_param_ +
                                  "' must be a categorical node parameter");
    for (const auto& c : s->choices)
      if (!std::holds_alternative<std::string>(c))
        throw std::invalid_argument("layer kind choices must be strings");
  }
}

std::optional<std::size_t> ParamSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i)
    if (specs_[i].name == name) return i;
  return std::nullopt;
}

const HyperparameterSpec* ParamSchema::spec(std::string_view name) const {
  auto i = find(name);
  return i ? &specs_[*i] : nullptr;
}

SchemaPtr make_schema(std::vector<HyperparameterSpec> specs, std::string layer_kind_param,
                      std::string default_layer_kind) {
  return std::make_shared<const ParamSchema>(std::move(specs), std::move(layer_kind_param),
                                             std::move(default_layer_kind));
}

const SchemaPtr& empty_schema() {
  static const SchemaPtr empty = std::make_shared<const ParamSchema>();
  return empty;
}

HyperparameterSpace HyperparameterSpace::make(std::vector<HyperparameterSpec> node_params,
                                              std::vector<HyperparameterSpec> global_params,
                                              std::string layer_kind_param,
                                              std::string default_layer_kind) {
  HyperparameterSpace space;
  space.node = make_schema(std::move(node_params), layer_kind_param, default_layer_kind);
  space.global = make_schema(std::move(global_params));
  for (const auto& s : space.node->specs())
    if (space.global->find(s.name))
      throw std::invalid_argument("hyperparameter '" + s.name +
                                  "' declared in both node and global parts");
  space.layer_kind_param = std::move(layer_kind_param);
  space.default_layer_kind = std::move(default_layer_kind);
  return space;
}

HyperparameterSpace HyperparameterSpace::without_globals() const {
  HyperparameterSpace s = *this;
  s.global = empty_schema();
  return s;
}

bool operator==(const HyperparameterSpace& a, const HyperparameterSpace& b) {
  return *a.node == *b.node && *a.global == *b.global &&
         a.layer_kind_param == b.layer_kind_param &&
         a.default_layer_kind == b.default_layer_kind;
}

HyperparameterTable::HyperparameterTable() : schema_(empty_schema()) {}

HyperparameterTable::HyperparameterTable(SchemaPtr schema, std::vector<ParamValue> values)
    : schema_(std::move(schema)), values_(std::move(values)) {
  if (!schema_) throw std::invalid_argument("table without schema");
  if (values_.size() != schema_->size())
    throw std::invalid_argument("table value count does not match schema");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!(*schema_)[i].contains(values_[i]))
      throw std::invalid_argument("value for '" + (*schema_)[i].name + "' outside its range");
}

const ParamValue& HyperparameterTable::at(std::string_view name) const {
  const auto* v = find(name);
  if (v == nullptr) throw std::out_of_range("no hyperparameter named '" + std::string(name) + "'");
  return *v;
}

const ParamValue* HyperparameterTable::find(std::string_view name) const {
  auto i = schema_->find(name);
  return i ? &values_[*i] : nullptr;
}

bool HyperparameterTable::same_schema(const HyperparameterTable& other) const {
  return schema_ == other.schema_ || *schema_ == *other.schema_;
}

ParamMap HyperparameterTable::to_map() const {
  ParamMap out;
  for (std::size_t i = 0; i < values_.size(); ++i) out.emplace((*schema_)[i].name, values_[i]);
  return out;
}

bool operator==(const HyperparameterTable& a, const HyperparameterTable& b) {
  return a.same_schema(b) && a.values_ == b.values_;
}

namespace {

ParamValue sample_value(const HyperparameterSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case ParamKind::real: return rng.uniform(spec.lower, spec.upper);
    case ParamKind::integer:
      return rng.integer(static_cast<std::int64_t>(spec.lower),
                         static_cast<std::int64_t>(spec.upper));
    case ParamKind::binary: return rng.bernoulli(0.5);
    case ParamKind::categorical: return spec.choices[rng.index(spec.choices.size())];
  }
  return 0.0;
}

void require_same_schema(const HyperparameterTable& a, const HyperparameterTable& b) {
  if (!a.same_schema(b))
    throw IncompatibleGenomes("hyperparameter tables built from different schemas");
}

}  // namespace

HyperparameterTable sample_table(const SchemaPtr& schema, Rng& rng) {
  std::vector<ParamValue> values;
  values.reserve(schema->size());
  for (const auto& spec : schema->specs()) values.push_back(sample_value(spec, rng));
  return HyperparameterTable(schema, std::move(values));
}

ParamValue perturb_value(const HyperparameterSpec& spec, const ParamValue& value, double noise) {
  switch (spec.kind) {
    case ParamKind::real:
      return std::clamp(std::get<double>(value) + noise, spec.lower, spec.upper);
    case ParamKind::integer: {
      const double moved = static_cast<double>(std::get<std::int64_t>(value)) + noise;
      return static_cast<std::int64_t>(std::clamp(std::round(moved), spec.lower, spec.upper));
    }
    case ParamKind::binary: return !std::get<bool>(value);
    case ParamKind::categorical: return value;
  }
  return value;
}

ParamValue mutate_value(const HyperparameterSpec& spec, const ParamValue& value, Rng& rng) {
  switch (spec.kind) {
    case ParamKind::real:
    case ParamKind::integer:
      return perturb_value(spec, value, rng.normal() * spec.sigma_fraction * spec.width());
    case ParamKind::binary: return !std::get<bool>(value);
    case ParamKind::categorical: {
      if (spec.choices.size() < 2) return value;
      std::vector<const ParamValue*> others;
      for (const auto& c : spec.choices)
        if (c != value) others.push_back(&c);
      return *others[rng.index(others.size())];
    }
  }
  return value;
}

HyperparameterTable mutate_table(const HyperparameterTable& table, double per_param_rate,
                                 Rng& rng) {
  std::vector<ParamValue> values(table.values().begin(), table.values().end());
  const auto& schema = table.schema();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (rng.bernoulli(per_param_rate)) values[i] = mutate_value(schema[i], values[i], rng);
  return HyperparameterTable(table.schema_ptr(), std::move(values));
}

HyperparameterTable crossover_tables(const HyperparameterTable& a, const HyperparameterTable& b,
                                     Rng& rng) {
  require_same_schema(a, b);
  std::vector<ParamValue> values;
  values.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    values.push_back(rng.bernoulli(0.5) ? b.values()[i] : a.values()[i]);
  return HyperparameterTable(a.schema_ptr(), std::move(values));
}

HyperparameterTable crossover_tables(const HyperparameterTable& a, const HyperparameterTable& b,
                                     std::span<const bool> pick_b) {
  require_same_schema(a, b);
  if (pick_b.size() != a.size()) throw std::invalid_argument("crossover mask size mismatch");
  std::vector<ParamValue> values;
  values.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) values.push_back(pick_b[i] ? b.values()[i] : a.values()[i]);
  return HyperparameterTable(a.schema_ptr(), std::move(values));
}

double table_distance(const HyperparameterTable& a, const HyperparameterTable& b) {
  require_same_schema(a, b);
  if (a.size() == 0) return 0.0;
  double total = 0.0;
  const auto& schema = a.schema();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& spec = schema[i];
    const auto& x = a.values()[i];
    const auto& y = b.values()[i];
    if (spec.kind == ParamKind::real || spec.kind == ParamKind::integer) {
      const double w = spec.width();
      total += w > 0.0 ? std::abs(as_number(x) - as_number(y)) / w : 0.0;
    } else {
      total += x == y ? 0.0 : 1.0;
    }
  }
  return total / static_cast<double>(a.size());
}

std::string layer_kind_of(const HyperparameterTable& node_params) {
  const auto& schema = node_params.schema();
  if (schema.layer_kind_param().empty()) return schema.default_layer_kind();
  return std::get<std::string>(node_params.at(schema.layer_kind_param()));
}

double as_number(const ParamValue& value) {
  if (const auto* d = std::get_if<double>(&value)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  if (const auto* b = std::get_if<bool>(&value)) return *b ? 1.0 : 0.0;
  throw std::invalid_argument("non-numeric hyperparameter value '" + std::get<std::string>(value) + "'");
}

std::string to_string(const ParamValue& value) {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  return to_json(value).dump();
}

json to_json(const ParamValue& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

ParamValue param_value_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw std::invalid_argument("hyperparameter value must be a number, boolean or string");
}

json to_json(const ParamMap& map) {
  json out = json::object();
  for (const auto& [k, v] : map) out[k] = to_json(v);
  return out;
}

ParamMap param_map_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("parameter map must be an object");
  ParamMap out;
  for (const auto& [k, v] : j.items()) out.emplace(k, param_value_from_json(v));
  return out;
}

json to_json(const HyperparameterSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["kind"] = std::string(to_string(spec.kind));
  switch (spec.kind) {
    case ParamKind::real:
      j["range"] = {spec.lower, spec.upper};
      j["sigma"] = spec.sigma_fraction;
      break;
    case ParamKind::integer:
      j["range"] = {static_cast<std::int64_t>(spec.lower), static_cast<std::int64_t>(spec.upper)};
      j["sigma"] = spec.sigma_fraction;
      break;
    case ParamKind::binary: break;
    case ParamKind::categorical: {
      json choices = json::array();
      for (const auto& c : spec.choices) choices.push_back(to_json(c));
      j["choices"] = choices;
      break;
    }
  }
  return j;
}

HyperparameterSpec spec_from_json(const json& j) {
  HyperparameterSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.kind = param_kind_from_string(j.at("kind").get<std::string>());
  if (spec.kind == ParamKind::real || spec.kind == ParamKind::integer) {
    const auto& range = j.at("range");
    if (!range.is_array() || range.size() != 2)
      throw std::invalid_argument("hyperparameter '" + spec.name + "': range must be [lo, hi]");
    spec.lower = range[0].get<double>();
    spec.upper = range[1].get<double>();
    spec.sigma_fraction = j.value("sigma", 0.1);
  } else if (spec.kind == ParamKind::binary) {
    spec.lower = 0.0;
    spec.upper = 1.0;
  } else {
    for (const auto& c : j.at("choices")) spec.choices.push_back(param_value_from_json(c));
  }
  spec.validate();
  return spec;
}

json to_json(const HyperparameterSpace& space) {
  json node = json::array(), global = json::array();
  for (const auto& s : space.node->specs()) node.push_back(to_json(s));
  for (const auto& s : space.global->specs()) global.push_back(to_json(s));
  return {{"node", node},
          {"global", global},
          {"layer_kind_param", space.layer_kind_param},
          {"default_layer_kind", space.default_layer_kind}};
}

HyperparameterSpace space_from_json(const json& j) {
  std::vector<HyperparameterSpec> node, global;
  for (const auto& s : j.value("node", json::array())) node.push_back(spec_from_json(s));
  for (const auto& s : j.value("global", json::array())) global.push_back(spec_from_json(s));
  return HyperparameterSpace::make(std::move(node), std::move(global),
                                   j.value("layer_kind_param", std::string()),
                                   j.value("default_layer_kind", std::string("dense")));
}

json to_json(const HyperparameterTable& table) {
  json out = json::object();
  for (std::size_t i = 0; i < table.size(); ++i)
    out[table.schema()[i].name] = to_json(table.values()[i]);
  return out;
}

HyperparameterTable table_from_json(const json& j, const SchemaPtr& schema) {
  if (!j.is_object()) throw std::invalid_argument("hyperparameter table must be an object");
  if (j.size() != schema->size())
    throw std::invalid_argument("hyperparameter table has unexpected entries");
  std::vector<ParamValue> values;
  values.reserve(schema->size());
  for (const auto& spec : schema->specs()) {
    auto it = j.find(spec.name);
    if (it == j.end()) throw std::invalid_argument("hyperparameter table lacks '" + spec.name + "'");
    values.push_back(param_value_from_json(*it));
  }
  return HyperparameterTable(schema, std::move(values));
}

}  // namespace codeepneat
