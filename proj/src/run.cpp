#include "codeepneat/run.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

namespace codeepneat {

json to_json(const GenerationLog& log) {
  return {{"generation", log.generation},
          {"best_fitness", log.best_fitness},
          {"mean_fitness", log.mean_fitness},
          {"blueprint_species", log.blueprint_species},
          {"module_species", log.module_species},
          {"best_network_id", log.best_network_id},
          {"evaluations", log.evaluations},
          {"failures", log.failures}};
}

GenerationLog generation_log_from_json(const json& j) {
  GenerationLog g;
  g.generation = j.at("generation").get<int>();
  g.best_fitness = j.at("best_fitness").get<double>();
  g.mean_fitness = j.at("mean_fitness").get<double>();
  g.blueprint_species = j.at("blueprint_species").get<std::size_t>();
  g.module_species = j.at("module_species").get<std::size_t>();
  g.best_network_id = j.at("best_network_id").get<std::uint64_t>();
  g.evaluations = j.at("evaluations").get<std::size_t>();
  g.failures = j.at("failures").get<std::size_t>();
  return g;
}

EvaluatorPtr evaluator_for(const EvolutionConfig& config) { return make_evaluator(config.evaluator); }

RunState start_run(const EvolutionConfig& config) {
  RunState s;
  s.config = config;
  s.rng = Rng(config.seed);
  if (config.mode == RunMode::codeepneat) {
    s.co = initialize_copopulations(config.space, config.co, s.rng);
  } else {
    s.population = initialize_population<ModuleChromosome>(
        config.population.population_size,
        [&](Rng& r) { return minimal_chromosome(config.space, r); }, config.population, s.rng);
  }
  return s;
}

namespace {

void note_best(RunState& s, double fitness, std::optional<AssembledNetwork>& net) {
  if (!net) return;
  if (s.best && !(fitness > s.best->fitness)) return;
  s.best = BestNetwork{fitness, s.generation, std::move(*net)};
}

GenerationLog advance_codeepneat(RunState& s, EvaluationBackend& backend) {
  auto r = evolve_generation(s.co, s.config.space, s.config.co, backend, s.rng);
  GenerationLog g;
  g.generation = s.generation;
  g.best_fitness = r.best_fitness;
  g.mean_fitness = r.mean_fitness;
  g.blueprint_species = r.blueprint_species;
  g.module_species = r.module_species;
  g.best_network_id = r.best_network_id;
  g.evaluations = r.records.size();
  for (const auto& rec : r.records) g.failures += rec.failed ? 1 : 0;
  note_best(s, r.best_fitness, r.best_network);
  s.last_records = std::move(r.records);
  return g;
}

GenerationLog advance_deepneat(RunState& s, EvaluationBackend& backend) {
  const auto& cfg = s.config;
  std::vector<AssemblyRecord> records;
  std::vector<std::optional<AssembledNetwork>> networks;
  const auto evaluate = [&](const std::vector<const ModuleChromosome*>& members) {
    std::vector<EvalRequest> requests;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < members.size(); ++i) {
      AssemblyRecord rec;
      rec.network_id = s.next_network_id++;
      rec.blueprint_id = members[i]->id;
      try {
        EvalRequest req{assemble(*members[i], cfg.co.assembly), cfg.co.budget};
        req.network.provenance.network_id = rec.network_id;
        req.budget.seed = derive_seed(cfg.co.evaluation_seed, rec.network_id);
        requests.push_back(std::move(req));
        owner.push_back(i);
      } catch (const AssemblyError& e) {
        spdlog::warn("network {}: assembly failed: {}", rec.network_id, e.what());
        rec.fitness = cfg.co.fitness_floor;
        rec.failed = true;
      }
      records.push_back(std::move(rec));
      networks.emplace_back();
    }
    const auto reports = backend.evaluate_all(requests);
    if (reports.size() != requests.size())
      throw std::runtime_error("evaluation backend returned the wrong number of reports");
    for (std::size_t k = 0; k < reports.size(); ++k) {
      records[owner[k]].fitness = reports[k].fitness;
      records[owner[k]].failed = reports[k].failed;
      networks[owner[k]] = std::move(requests[k].network);
    }
    std::vector<double> scores;
    for (const auto& rec : records) scores.push_back(*rec.fitness);
    return scores;
  };
  auto step = deepneat_generation<ModuleChromosome>(
      s.population, evaluate, cfg.population,
      [&](ModuleChromosome c, Rng& r) {
        return mutate_module(std::move(c), cfg.space, s.registry, cfg.mutation, r);
      },
      s.registry, s.rng);

  GenerationLog g;
  g.generation = s.generation;
  g.evaluations = records.size();
  g.blueprint_species = s.population.species.size();
  std::size_t best = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    sum += *records[i].fitness;
    g.failures += records[i].failed ? 1 : 0;
    if (*records[i].fitness > *records[best].fitness) best = i;
  }
  if (!records.empty()) {
    g.best_fitness = *records[best].fitness;
    g.mean_fitness = sum / static_cast<double>(records.size());
    g.best_network_id = records[best].network_id;
    note_best(s, g.best_fitness, networks[best]);
  }
  s.population = std::move(step.next);
  s.last_records = std::move(records);
  return g;
}

json best_json(const std::optional<BestNetwork>& best) {
  if (!best) return nullptr;
  return {{"fitness", best->fitness}, {"generation", best->generation}, {"network", to_json(best->network)}};
}

}  // namespace

const GenerationLog& advance(RunState& state, EvaluationBackend& backend) {
  auto g = state.config.mode == RunMode::codeepneat ? advance_codeepneat(state, backend)
                                                    : advance_deepneat(state, backend);
  ++state.generation;
  state.log.push_back(g);
  return state.log.back();
}

json checkpoint_json(const RunState& s) {
  json config = config_to_json(s.config);
  config.erase("output_dir");
  json log = json::array();
  for (const auto& g : s.log) log.push_back(to_json(g));
  json records = json::array();
  for (const auto& r : s.last_records) records.push_back(to_json(r));
  json j = {{"format", 1},
            {"config", config},
            {"generation", s.generation},
            {"rng", s.rng.state()},
            {"log", log},
            {"last_records", records},
            {"best", best_json(s.best)}};
  if (s.config.mode == RunMode::codeepneat) {
    j["populations"] = to_json(s.co);
  } else {
    j["population"] = to_json(s.population);
    j["registry"] = s.registry.to_json();
    j["next_network_id"] = s.next_network_id;
  }
  return j;
}

std::string checkpoint_text(const RunState& state) { return checkpoint_json(state).dump(2) + "\n"; }

RunState load_checkpoint(const json& j) {
  if (j.value("format", 0) != 1) throw std::runtime_error("unsupported checkpoint format");
  RunState s;
  s.config = parse_config(j.at("config"));
  s.generation = j.at("generation").get<int>();
  s.rng.set_state(j.at("rng").get<std::string>());
  for (const auto& g : j.at("log")) s.log.push_back(generation_log_from_json(g));
  for (const auto& r : j.at("last_records")) s.last_records.push_back(assembly_record_from_json(r));
  if (const auto& b = j.at("best"); !b.is_null())
    s.best = BestNetwork{b.at("fitness").get<double>(), b.at("generation").get<int>(),
                         network_from_json(b.at("network"))};
  if (s.config.mode == RunMode::codeepneat) {
    s.co = copopulations_from_json(j.at("populations"), s.config.space);
  } else {
    s.population = module_population_from_json(j.at("population"), s.config.space);
    s.registry = InnovationRegistry::from_json(j.at("registry"));
    s.next_network_id = j.at("next_network_id").get<std::uint64_t>();
  }
  return s;
}

RunState load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("'" + path.string() + "' is not valid JSON");
  return load_checkpoint(j);
}

AssembledNetwork best_or_initial_network(const RunState& s) {
  if (s.best) return s.best->network;
  if (s.config.mode == RunMode::deepneat) {
    const auto members = s.population.members();
    if (members.empty()) throw std::runtime_error("population is empty");
    return assemble(*members.front(), s.config.co.assembly);
  }
  const auto blueprints = s.co.blueprints.members();
  if (blueprints.empty()) throw std::runtime_error("blueprint population is empty");
  std::map<SpeciesId, const ModuleChromosome*> modules;
  for (const auto& sp : s.co.modules.species)
    if (!sp.members.empty()) modules[sp.id] = &sp.members.front();
  return assemble(*blueprints.front(), modules, s.config.co.assembly);
}

namespace {

std::string numbered(const char* prefix, int generation, const char* suffix) {
  std::ostringstream os;
  os << prefix << std::setw(5) << std::setfill('0') << generation << suffix;
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << text;
    if (!out) throw std::runtime_error("write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

std::string number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::string records_filename(int generation) { return numbered("gen_", generation, ".jsonl"); }
std::string checkpoint_filename(int generation) { return numbered("gen_", generation, ".json"); }

RunWriter::RunWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_ / "records");
  std::filesystem::create_directories(dir_ / "checkpoints");
}

void RunWriter::write_generation(const RunState& s) const {
  if (s.generation == 0) return;
  std::string lines;
  for (const auto& r : s.last_records) lines += to_json(r).dump() + "\n";
  write_file(dir_ / "records" / records_filename(s.generation - 1), lines);

  std::string csv =
      "generation,best_fitness,mean_fitness,blueprint_species,module_species,best_network_id,"
      "evaluations,failures\n";
  for (const auto& g : s.log)
    csv += std::to_string(g.generation) + "," + number(g.best_fitness) + "," + number(g.mean_fitness) +
           "," + std::to_string(g.blueprint_species) + "," + std::to_string(g.module_species) + "," +
           std::to_string(g.best_network_id) + "," + std::to_string(g.evaluations) + "," +
           std::to_string(g.failures) + "\n";
  write_file(dir_ / "fitness.csv", csv);

  if (s.best) {
    write_file(dir_ / "best.dot", export_dot(s.best->network));
    write_file(dir_ / "best.json", export_json(s.best->network));
  }
}

void RunWriter::write_checkpoint_text(const std::string& text, int generation) const {
  write_file(dir_ / "checkpoints" / checkpoint_filename(generation), text);
  write_file(dir_ / "checkpoint.json", text);
}

std::filesystem::path RunWriter::write_checkpoint(const RunState& s) const {
  write_checkpoint_text(checkpoint_text(s), s.generation);
  return dir_ / "checkpoints" / checkpoint_filename(s.generation);
}

void run_until(RunState& state, EvaluationBackend& backend, int target, const RunWriter& writer) {
  if (target < state.generation)
    throw std::invalid_argument("target generation " + std::to_string(target) +
                                " is behind the checkpoint (" + std::to_string(state.generation) + ")");
  writer.write_checkpoint(state);
  int saved = state.generation;
  const int every = std::max(1, state.config.checkpoint_every);
  while (state.generation < target) {
    try {
      const auto& g = advance(state, backend);
      spdlog::info("generation {}: best {:.6f} mean {:.6f} species {}/{} failures {}", g.generation,
                   g.best_fitness, g.mean_fitness, g.blueprint_species, g.module_species, g.failures);
    } catch (...) {
      spdlog::error("generation {} failed; checkpoint.json still holds generation {}", state.generation,
                    saved);
      throw;
    }
    writer.write_generation(state);
    if (state.generation % every == 0 || state.generation == target) {
      writer.write_checkpoint(state);
      saved = state.generation;
    }
  }
}

}  // namespace codeepneat
