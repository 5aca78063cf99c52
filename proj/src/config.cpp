#include "codeepneat/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

namespace codeepneat {

std::string_view to_string(RunMode mode) {
  return mode == RunMode::codeepneat ? "codeepneat" : "deepneat";
}

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(join(path, key), "unknown field");
  }
}

double read_real(const json& obj, const std::string& path, const char* key, double fallback,
                 double lo = -std::numeric_limits<double>::infinity(),
                 double hi = std::numeric_limits<double>::infinity()) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) throw ConfigError(join(path, key), "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v) || v < lo || v > hi) {
    std::ostringstream os;
    os << "value " << v << " outside [" << lo << ", " << hi << "]";
    throw ConfigError(join(path, key), os.str());
  }
  return v;
}

double read_rate(const json& obj, const std::string& path, const char* key, double fallback) {
  return read_real(obj, path, key, fallback, 0.0, 1.0);
}

std::int64_t read_int(const json& obj, const std::string& path, const char* key, std::int64_t fallback,
                      std::int64_t lo = std::numeric_limits<std::int64_t>::min(),
                      std::int64_t hi = std::numeric_limits<std::int64_t>::max()) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
  const auto v = it->get<std::int64_t>();
  if (v < lo || v > hi)
    throw ConfigError(join(path, key), "value " + std::to_string(v) + " outside [" +
                                           std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

std::string read_string(const json& obj, const std::string& path, const char* key,
                        const std::string& fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) throw ConfigError(join(path, key), "expected a string");
  return it->get<std::string>();
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  auto it = root.find(key);
  if (it == root.end()) return empty;
  expect_object(*it, key);
  return *it;
}

ReproductionConfig read_reproduction(const json& j, const std::string& path, ReproductionConfig r) {
  expect_object(j, path);
  reject_unknown(j, path,
                 {"population_size", "survival_fraction", "elitism", "crossover_rate", "stale_limit",
                  "threshold", "coefficients"});
  r.population_size = static_cast<std::size_t>(read_int(j, path, "population_size",
                                                        static_cast<std::int64_t>(r.population_size), 1));
  r.survival_fraction = read_rate(j, path, "survival_fraction", r.survival_fraction);
  r.elitism = static_cast<std::size_t>(
      read_int(j, path, "elitism", static_cast<std::int64_t>(r.elitism), 0,
               static_cast<std::int64_t>(r.population_size)));
  r.crossover_rate = read_rate(j, path, "crossover_rate", r.crossover_rate);
  r.stale_limit = static_cast<int>(read_int(j, path, "stale_limit", r.stale_limit, 1, 1 << 30));
  r.threshold = read_real(j, path, "threshold", r.threshold, 0.0);
  if (auto it = j.find("coefficients"); it != j.end()) {
    const auto p = join(path, "coefficients");
    expect_object(*it, p);
    reject_unknown(*it, p, {"excess", "disjoint", "params"});
    r.coefficients.excess = read_real(*it, p, "excess", r.coefficients.excess, 0.0);
    r.coefficients.disjoint = read_real(*it, p, "disjoint", r.coefficients.disjoint, 0.0);
    r.coefficients.params = read_real(*it, p, "params", r.coefficients.params, 0.0);
  }
  return r;
}

json to_json(const ReproductionConfig& r) {
  return {{"population_size", r.population_size},
          {"survival_fraction", r.survival_fraction},
          {"elitism", r.elitism},
          {"crossover_rate", r.crossover_rate},
          {"stale_limit", r.stale_limit},
          {"threshold", r.threshold},
          {"coefficients",
           {{"excess", r.coefficients.excess},
            {"disjoint", r.coefficients.disjoint},
            {"params", r.coefficients.params}}}};
}

MutationRates read_rates(const json& j, const std::string& path, MutationRates r) {
  expect_object(j, path);
  reject_unknown(j, path,
                 {"add_node", "add_edge", "toggle_connection", "skip_connection", "table", "per_param",
                  "species_pointer"});
  r.add_node = read_rate(j, path, "add_node", r.add_node);
  r.add_edge = read_rate(j, path, "add_edge", r.add_edge);
  r.toggle_connection = read_rate(j, path, "toggle_connection", r.toggle_connection);
  r.skip_connection = read_rate(j, path, "skip_connection", r.skip_connection);
  r.table = read_rate(j, path, "table", r.table);
  r.per_param = read_rate(j, path, "per_param", r.per_param);
  r.species_pointer = read_rate(j, path, "species_pointer", r.species_pointer);
  return r;
}

json to_json(const MutationRates& r) {
  return {{"add_node", r.add_node},
          {"add_edge", r.add_edge},
          {"toggle_connection", r.toggle_connection},
          {"skip_connection", r.skip_connection},
          {"table", r.table},
          {"per_param", r.per_param},
          {"species_pointer", r.species_pointer}};
}

json merged(json base, const json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object() && key != "evaluator" &&
        key != "space")
      base[key] = merged(base[key], value);
    else
      base[key] = value;
  }
  return base;
}

}  // namespace

EvolutionConfig parse_config(const json& input) {
  expect_object(input, "");
  json tree = input;
  std::string preset;
  if (auto it = input.find("preset"); it != input.end()) {
    if (!it->is_string()) throw ConfigError("preset", "expected a string");
    preset = it->get<std::string>();
    tree = merged(preset_tree(preset), input);
  }
  reject_unknown(tree, "",
                 {"preset", "mode", "seed", "generations", "checkpoint_every", "output_dir", "space",
                  "assembly_count", "blueprints", "modules", "population", "blueprint_mutation",
                  "module_mutation", "mutation", "assembly", "evaluator", "budget", "fitness_floor",
                  "distributed"});

  EvolutionConfig c;
  c.preset = preset;
  const auto mode = read_string(tree, "", "mode", "codeepneat");
  if (mode == "codeepneat")
    c.mode = RunMode::codeepneat;
  else if (mode == "deepneat")
    c.mode = RunMode::deepneat;
  else
    throw ConfigError("mode", "expected codeepneat or deepneat, got '" + mode + "'");

  auto seed = tree.find("seed");
  if (seed == tree.end()) throw ConfigError("seed", "is required (runs never default to the clock)");
  if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<std::int64_t>() >= 0))
    throw ConfigError("seed", "expected a non-negative integer");
  c.seed = seed->get<std::uint64_t>();

  c.generations = static_cast<int>(read_int(tree, "", "generations", c.generations, 0, 1 << 20));
  c.checkpoint_every = static_cast<int>(read_int(tree, "", "checkpoint_every", c.checkpoint_every, 1, 1 << 20));
  c.output_dir = read_string(tree, "", "output_dir", c.output_dir);

  auto space = tree.find("space");
  if (space == tree.end()) throw ConfigError("space", "is required (or choose a preset)");
  expect_object(*space, "space");
  reject_unknown(*space, "space", {"node", "global", "layer_kind_param", "default_layer_kind"});
  try {
    c.space = space_from_json(*space);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("space", e.what());
  }

  c.co.assembly_count = static_cast<std::size_t>(
      read_int(tree, "", "assembly_count", static_cast<std::int64_t>(c.co.assembly_count), 1));
  c.co.blueprints = read_reproduction(section(tree, "blueprints"), "blueprints", c.co.blueprints);
  c.co.modules = read_reproduction(section(tree, "modules"), "modules", c.co.modules);
  c.population = read_reproduction(section(tree, "population"), "population", c.population);
  c.co.blueprint_rates = read_rates(section(tree, "blueprint_mutation"), "blueprint_mutation", c.co.blueprint_rates);
  c.co.module_rates = read_rates(section(tree, "module_mutation"), "module_mutation", c.co.module_rates);
  c.mutation = read_rates(section(tree, "mutation"), "mutation", c.mutation);

  const auto& assembly = section(tree, "assembly");
  reject_unknown(assembly, "assembly", {"merge_method", "downsample", "input_shape", "output_units"});
  try {
    c.co.assembly.policy.method = merge_method_from_string(
        read_string(assembly, "assembly", "merge_method", std::string(to_string(c.co.assembly.policy.method))));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("assembly.merge_method", e.what());
  }
  try {
    c.co.assembly.policy.downsample = downsample_from_string(
        read_string(assembly, "assembly", "downsample", std::string(to_string(c.co.assembly.policy.downsample))));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("assembly.downsample", e.what());
  }
  if (auto it = assembly.find("input_shape"); it != assembly.end()) {
    try {
      c.co.assembly.input_shape = shape_from_json(*it);
    } catch (const std::exception& e) {
      throw ConfigError("assembly.input_shape", std::string("expected [channels, height, width]: ") + e.what());
    }
    const auto& s = c.co.assembly.input_shape;
    if (s.channels < 1 || s.height < 1 || s.width < 1)
      throw ConfigError("assembly.input_shape", "dimensions must be positive");
  }
  c.co.assembly.output_units = read_int(assembly, "assembly", "output_units", c.co.assembly.output_units, 1);

  auto evaluator = tree.find("evaluator");
  if (evaluator == tree.end()) throw ConfigError("evaluator", "is required (or choose a preset)");
  expect_object(*evaluator, "evaluator");
  try {
    make_evaluator(*evaluator);
  } catch (const std::exception& e) {
    throw ConfigError("evaluator", e.what());
  }
  c.evaluator = *evaluator;

  const auto& budget = section(tree, "budget");
  reject_unknown(budget, "budget", {"epochs", "sample_cap"});
  c.co.budget.epochs = static_cast<int>(read_int(budget, "budget", "epochs", c.co.budget.epochs, 1, 1 << 20));
  c.co.budget.sample_cap = static_cast<std::size_t>(
      read_int(budget, "budget", "sample_cap", static_cast<std::int64_t>(c.co.budget.sample_cap), 0));
  c.co.fitness_floor = read_real(tree, "", "fitness_floor", c.co.fitness_floor);
  c.co.evaluation_seed = derive_seed(c.seed, 0x6576616cULL);

  const auto& d = section(tree, "distributed");
  reject_unknown(d, "distributed",
                 {"max_retries", "min_timeout", "timeout_factor", "heartbeat_timeout", "registration_wait"});
  c.distributed.max_retries = static_cast<int>(read_int(d, "distributed", "max_retries", c.distributed.max_retries, 0, 100));
  c.distributed.min_timeout = read_real(d, "distributed", "min_timeout", c.distributed.min_timeout, 0.0);
  c.distributed.timeout_factor = read_real(d, "distributed", "timeout_factor", c.distributed.timeout_factor, 1.0);
  c.distributed.heartbeat_timeout =
      read_real(d, "distributed", "heartbeat_timeout", c.distributed.heartbeat_timeout, 0.0);
  c.distributed.registration_wait =
      read_real(d, "distributed", "registration_wait", c.distributed.registration_wait, 0.0);
  return c;
}

EvolutionConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  json tree = json::parse(in, nullptr, false, true);
  if (tree.is_discarded()) throw ConfigError("", "'" + path + "' is not valid JSON");
  return parse_config(tree);
}

json config_to_json(const EvolutionConfig& c) {
  json j;
  if (!c.preset.empty()) j["preset"] = c.preset;
  j["mode"] = std::string(to_string(c.mode));
  j["seed"] = c.seed;
  j["generations"] = c.generations;
  j["checkpoint_every"] = c.checkpoint_every;
  j["output_dir"] = c.output_dir;
  j["space"] = to_json(c.space);
  j["assembly_count"] = c.co.assembly_count;
  j["blueprints"] = to_json(c.co.blueprints);
  j["modules"] = to_json(c.co.modules);
  j["population"] = to_json(c.population);
  j["blueprint_mutation"] = to_json(c.co.blueprint_rates);
  j["module_mutation"] = to_json(c.co.module_rates);
  j["mutation"] = to_json(c.mutation);
  j["assembly"] = {{"merge_method", std::string(to_string(c.co.assembly.policy.method))},
                   {"downsample", std::string(to_string(c.co.assembly.policy.downsample))},
                   {"input_shape", to_json(c.co.assembly.input_shape)},
                   {"output_units", c.co.assembly.output_units}};
  j["evaluator"] = c.evaluator;
  j["budget"] = {{"epochs", c.co.budget.epochs}, {"sample_cap", c.co.budget.sample_cap}};
  j["fitness_floor"] = c.co.fitness_floor;
  j["distributed"] = {{"max_retries", c.distributed.max_retries},
                      {"min_timeout", c.distributed.min_timeout},
                      {"timeout_factor", c.distributed.timeout_factor},
                      {"heartbeat_timeout", c.distributed.heartbeat_timeout},
                      {"registration_wait", c.distributed.registration_wait}};
  return j;
}

}  // namespace codeepneat
