#include "codeepneat/coevolution.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace codeepneat {

json to_json(const AssemblyRecord& record) {
  json choice = json::object();
  for (const auto& [s, m] : record.module_choice) choice[std::to_string(s)] = m;
  return {{"network_id", record.network_id},
          {"blueprint_id", record.blueprint_id},
          {"module_choice", choice},
          {"fitness", record.fitness ? json(*record.fitness) : json(nullptr)},
          {"failed", record.failed}};
}

AssemblyRecord assembly_record_from_json(const json& j) {
  AssemblyRecord r;
  r.network_id = j.at("network_id").get<std::uint64_t>();
  r.blueprint_id = j.at("blueprint_id").get<GenomeId>();
  for (const auto& [k, v] : j.at("module_choice").items())
    r.module_choice[std::stoll(k)] = v.get<GenomeId>();
  if (!j.at("fitness").is_null()) r.fitness = j.at("fitness").get<double>();
  r.failed = j.value("failed", false);
  return r;
}

double compensated_sum(const std::vector<double>& values) {
  double sum = 0.0, c = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      c += (sum - t) + v;
    else
      c += (v - t) + sum;
    sum = t;
  }
  return sum + c;
}

CoPopulations initialize_copopulations(const HyperparameterSpace& space,
                                       const CoevolutionConfig& config, Rng& rng) {
  CoPopulations co;
  const auto module_space = space.without_globals();
  co.modules = initialize_population<ModuleChromosome>(
      config.modules.population_size,
      [&](Rng& r) { return minimal_chromosome(module_space, r); }, config.modules, rng);
  const auto live = co.modules.species_ids();
  co.blueprints = initialize_population<BlueprintChromosome>(
      config.blueprints.population_size,
      [&](Rng& r) { return minimal_blueprint(space, live, r); }, config.blueprints, rng);
  return co;
}

std::size_t repair_species_pointers(CoPopulations& co, Rng& rng) {
  const auto live = co.modules.species_ids();
  if (live.empty()) throw std::runtime_error("no live module species");
  const std::set<SpeciesId> alive(live.begin(), live.end());
  std::size_t changed = 0;
  for (auto& s : co.blueprints.species)
    for (auto& m : s.members)
      for (auto& n : m.nodes)
        if (n.role == NodeRole::hidden && !alive.count(n.species)) {
          n.species = live[rng.index(live.size())];
          ++changed;
        }
  return changed;
}

std::vector<AssemblyRecord> sample_assemblies(CoPopulations& co, std::size_t count, Rng& rng) {
  const auto blueprints = co.blueprints.members();
  if (blueprints.empty()) throw std::runtime_error("blueprint population is empty");
  repair_species_pointers(co, rng);

  std::map<SpeciesId, const Species<ModuleChromosome>*> module_species;
  for (const auto& s : co.modules.species) module_species[s.id] = &s;

  std::vector<AssemblyRecord> records;
  records.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto& bp = *blueprints[k % blueprints.size()];
    AssemblyRecord r;
    r.network_id = co.next_network_id++;
    r.blueprint_id = bp.id;
    std::set<SpeciesId> pointers;
    for (const auto& n : bp.nodes)
      if (n.role == NodeRole::hidden && n.enabled) pointers.insert(n.species);
    for (auto s : pointers) {
      const auto& members = module_species.at(s)->members;
      r.module_choice[s] = members[rng.index(members.size())].id;
    }
    records.push_back(std::move(r));
  }
  return records;
}

Attribution attribute_fitness(const std::vector<AssemblyRecord>& records) {
  if (records.empty()) throw std::invalid_argument("cannot attribute fitness without records");
  std::map<GenomeId, std::vector<double>> bp, mod;
  for (const auto& r : records) {
    if (!r.fitness)
      throw std::invalid_argument("record " + std::to_string(r.network_id) + " has no fitness");
    bp[r.blueprint_id].push_back(*r.fitness);
    for (const auto& [s, m] : r.module_choice) mod[m].push_back(*r.fitness);
  }
  Attribution a;
  for (const auto& [id, v] : bp) a.blueprints[id] = compensated_sum(v) / static_cast<double>(v.size());
  for (const auto& [id, v] : mod) a.modules[id] = compensated_sum(v) / static_cast<double>(v.size());
  return a;
}

namespace {

template <class C>
FitnessMap fill(const Population<C>& pop, const std::map<GenomeId, double>& attributed, double floor) {
  std::vector<double> all;
  for (const auto* m : pop.members()) {
    auto it = attributed.find(m->id);
    if (it != attributed.end()) all.push_back(it->second);
  }
  const double population_mean =
      all.empty() ? floor : compensated_sum(all) / static_cast<double>(all.size());
  FitnessMap out;
  for (const auto& s : pop.species) {
    std::vector<double> known;
    for (const auto& m : s.members) {
      auto it = attributed.find(m.id);
      if (it != attributed.end()) known.push_back(it->second);
    }
    const double fallback =
        known.empty() ? population_mean : compensated_sum(known) / static_cast<double>(known.size());
    for (const auto& m : s.members) {
      auto it = attributed.find(m.id);
      out[m.id] = it != attributed.end() ? it->second : fallback;
    }
  }
  return out;
}

}  // namespace

FitnessMap fill_unevaluated(const Population<ModuleChromosome>& modules,
                            const std::map<GenomeId, double>& attributed, double floor) {
  return fill(modules, attributed, floor);
}

FitnessMap fill_unevaluated(const Population<BlueprintChromosome>& blueprints,
                            const std::map<GenomeId, double>& attributed, double floor) {
  return fill(blueprints, attributed, floor);
}

AssembledNetwork assemble_record(const CoPopulations& co, const AssemblyRecord& record,
                                 const AssemblyOptions& options) {
  const auto* bp = co.blueprints.find(record.blueprint_id);
  if (bp == nullptr)
    throw std::out_of_range("blueprint " + std::to_string(record.blueprint_id) + " not in population");
  std::map<SpeciesId, const ModuleChromosome*> modules;
  for (const auto& [s, id] : record.module_choice) {
    const auto* m = co.modules.find(id);
    if (m == nullptr) throw std::out_of_range("module " + std::to_string(id) + " not in population");
    modules[s] = m;
  }
  auto net = assemble(*bp, modules, options);
  net.provenance.network_id = record.network_id;
  return net;
}

CoGenerationResult evolve_generation(CoPopulations& co, const HyperparameterSpace& space,
                                     const CoevolutionConfig& config, EvaluationBackend& backend,
                                     Rng& rng) {
  CoGenerationResult result;
  result.generation = co.blueprints.generation;
  result.records = sample_assemblies(co, config.assembly_count, rng);

  std::vector<EvalRequest> requests;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    auto& rec = result.records[i];
    try {
      EvalRequest req{assemble_record(co, rec, config.assembly), config.budget};
      req.budget.seed = derive_seed(config.evaluation_seed, rec.network_id);
      requests.push_back(std::move(req));
      owner.push_back(i);
    } catch (const AssemblyError& e) {
      spdlog::warn("network {}: assembly failed: {}", rec.network_id, e.what());
      rec.fitness = config.fitness_floor;
      rec.failed = true;
    }
  }
  auto reports = backend.evaluate_all(requests);
  if (reports.size() != requests.size())
    throw std::runtime_error("evaluation backend returned the wrong number of reports");
  for (std::size_t k = 0; k < reports.size(); ++k) {
    auto& rec = result.records[owner[k]];
    rec.fitness = reports[k].fitness;
    rec.failed = reports[k].failed;
    if (rec.failed)
      spdlog::warn("network {}: evaluation failed, fitness set to {}", rec.network_id, reports[k].fitness);
  }
  result.reports = std::move(reports);

  double sum = 0.0;
  bool first = true;
  std::optional<std::size_t> best_request;
  for (const auto& rec : result.records) {
    sum += *rec.fitness;
    if (first || *rec.fitness > result.best_fitness) {
      result.best_fitness = *rec.fitness;
      result.best_network_id = rec.network_id;
      first = false;
    }
  }
  result.mean_fitness = sum / static_cast<double>(result.records.size());
  for (std::size_t k = 0; k < requests.size(); ++k)
    if (requests[k].network.provenance.network_id == result.best_network_id)
      result.best_network = std::move(requests[k].network);

  const auto attribution = attribute_fitness(result.records);
  for (const auto* m : co.modules.members())
    if (!attribution.modules.count(m->id)) ++result.unevaluated_modules;
  if (result.unevaluated_modules > 0)
    spdlog::debug("{} modules were not sampled this generation", result.unevaluated_modules);
  const auto module_fitness = fill_unevaluated(co.modules, attribution.modules, config.fitness_floor);
  const auto blueprint_fitness =
      fill_unevaluated(co.blueprints, attribution.blueprints, config.fitness_floor);
  result.blueprint_species = co.blueprints.species.size();
  result.module_species = co.modules.species.size();

  const auto module_space = space.without_globals();
  co.modules = reproduce<ModuleChromosome>(
      co.modules, module_fitness, config.modules,
      [&](ModuleChromosome c, Rng& r) {
        return mutate_module(std::move(c), module_space, co.module_registry, config.module_rates, r);
      },
      co.module_registry, rng);
  const auto live = co.modules.species_ids();
  co.blueprints = reproduce<BlueprintChromosome>(
      co.blueprints, blueprint_fitness, config.blueprints,
      [&](BlueprintChromosome c, Rng& r) {
        return mutate_blueprint(std::move(c), live, co.blueprint_registry, config.blueprint_rates, r);
      },
      co.blueprint_registry, rng);
  return result;
}

json to_json(const CoPopulations& co) {
  return {{"blueprints", to_json(co.blueprints)},
          {"modules", to_json(co.modules)},
          {"blueprint_registry", co.blueprint_registry.to_json()},
          {"module_registry", co.module_registry.to_json()},
          {"next_network_id", co.next_network_id}};
}

CoPopulations copopulations_from_json(const json& j, const HyperparameterSpace& space) {
  CoPopulations co;
  co.blueprints = blueprint_population_from_json(j.at("blueprints"), space);
  co.modules = module_population_from_json(j.at("modules"), space.without_globals());
  co.blueprint_registry = InnovationRegistry::from_json(j.at("blueprint_registry"));
  co.module_registry = InnovationRegistry::from_json(j.at("module_registry"));
  co.next_network_id = j.at("next_network_id").get<std::uint64_t>();
  return co;
}

}  // namespace codeepneat
