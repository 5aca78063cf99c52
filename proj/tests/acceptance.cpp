// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "codeepneat/distrib.hpp"
#include "codeepneat/run.hpp"
#include "support.hpp"

using namespace codeepneat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += fmt::format("{}{:.4f}", i ? " " : "", v[i]);
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("codeepneat-acceptance-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

// --- 1 ----------------------------------------------------------------------

Outcome invariant_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string cmd = "CODEEPNEAT_OUT_DIR= \"" CODEEPNEAT_UNIT_TESTS "\" > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const bool suite_ok = status == 0;

  // Independent closure fuzz: every operator on modules and blueprints.
  const auto space = support::mixed_space();
  const auto lstm = support::lstm_space();
  const std::vector<SpeciesId> live{0, 1, 2};
  Rng rng(2024);
  InnovationRegistry registry;
  std::vector<ModuleChromosome> modules;
  for (int i = 0; i < 8; ++i) modules.push_back(minimal_chromosome(i % 2 ? space : lstm, rng));
  std::vector<BlueprintChromosome> blueprints;
  for (int i = 0; i < 4; ++i) blueprints.push_back(minimal_blueprint(space, live, rng));
  std::size_t applications = 0, violations = 0;
  while (applications < 100000) {
    const double u = rng.uniform();
    if (u < 0.8) {
      const auto i = rng.index(modules.size());
      auto& c = modules[i];
      const auto& s = i % 2 ? space : lstm;
      const double v = rng.uniform();
      if (v < 0.2)
        c = mutate_add_node(c, s, registry, rng).chromosome;
      else if (v < 0.4)
        c = mutate_add_edge(c, registry, rng).chromosome;
      else if (v < 0.55)
        c = toggle_layer_connection(c, rng).chromosome;
      else if (v < 0.7)
        c = count_active_lstm(c) >= 2 ? mutate_skip_connection(c, registry, rng).chromosome : c;
      else if (v < 0.85)
        c = mutate_parameters(c, 0.5, 0.5, rng);
      else
        c = crossover(c, modules[(i + 2 * (1 + rng.index(3))) % modules.size()], rng.uniform(),
                      rng.uniform(), rng);
      violations += check_invariants(c).empty() ? 0 : 1;
      if (c.nodes.size() > 40) c = minimal_chromosome(s, rng);
    } else {
      auto& b = blueprints[rng.index(blueprints.size())];
      const double v = rng.uniform();
      if (v < 0.3)
        b = mutate_add_node(b, live, registry, rng).chromosome;
      else if (v < 0.55)
        b = mutate_add_edge(b, registry, rng).chromosome;
      else if (v < 0.75)
        b = toggle_layer_connection(b, rng).chromosome;
      else if (v < 0.85)
        b = mutate_species_pointers(b, live, 0.3, rng);
      else
        b = crossover(b, blueprints[rng.index(blueprints.size())], rng.uniform(), rng.uniform(), rng);
      violations += check_invariants(b).empty() ? 0 : 1;
      if (b.nodes.size() > 40) b = minimal_blueprint(space, live, rng);
    }
    if (++applications % 500 == 0) registry.new_generation();
  }
  const double elapsed = seconds_since(t0);
  return {suite_ok && violations == 0 && elapsed < 300.0,
          fmt::format("unit suite {}, {} applications, {} violations, {:.1f}s (limit 300s)",
                      suite_ok ? "green" : "red", applications, violations, elapsed)};
}

// --- 2 ----------------------------------------------------------------------

template <class C>
GeneAlignment brute_force_alignment(const C& a, const C& b) {
  const auto ia = support::gene_ids(a), ib = support::gene_ids(b);
  const InnovationId max_a = ia.empty() ? 0 : *ia.rbegin();
  const InnovationId max_b = ib.empty() ? 0 : *ib.rbegin();
  GeneAlignment out;
  for (auto id : ia) {
    if (ib.count(id))
      out.matched.push_back(id);
    else if (id > max_b)
      out.excess_a.push_back(id);
    else
      out.disjoint_a.push_back(id);
  }
  for (auto id : ib) {
    if (ia.count(id)) continue;
    if (id > max_a)
      out.excess_b.push_back(id);
    else
      out.disjoint_b.push_back(id);
  }
  return out;
}

Outcome alignment_oracle() {
  const auto space = support::mixed_space();
  const std::vector<SpeciesId> live{0, 1, 2};
  Rng rng(77);
  InnovationRegistry registry;
  std::size_t mismatches = 0, pairs = 0;
  for (int i = 0; i < 100; ++i) {
    const auto a = support::grow_module(space, registry, rng, static_cast<int>(rng.index(30)));
    const auto b = support::grow_module(space, registry, rng, static_cast<int>(rng.index(30)));
    mismatches += align_genes(a, b) == brute_force_alignment(a, b) ? 0 : 1;
    const auto pa = support::grow_blueprint(space, live, registry, rng, static_cast<int>(rng.index(30)));
    const auto pb = support::grow_blueprint(space, live, registry, rng, static_cast<int>(rng.index(30)));
    mismatches += align_genes(pa, pb) == brute_force_alignment(pa, pb) ? 0 : 1;
    pairs += 2;
    if (i % 10 == 9) registry.new_generation();
  }
  return {mismatches == 0, fmt::format("{} pairs (100 module, 100 blueprint), {} mismatches", pairs, mismatches)};
}

// --- 3 ----------------------------------------------------------------------

Outcome attribution_oracle() {
  Rng rng(99);
  double worst = 0.0;
  std::size_t key_mismatches = 0;
  for (int gen = 0; gen < 1000; ++gen) {
    std::vector<AssemblyRecord> records(1 + rng.index(120));
    for (std::size_t k = 0; k < records.size(); ++k) {
      auto& r = records[k];
      r.network_id = k + 1;
      r.blueprint_id = 1 + rng.index(25);
      for (std::size_t s = 0, n = 1 + rng.index(5); s < n; ++s)
        r.module_choice[static_cast<SpeciesId>(s)] = 1000 + 100 * s + rng.index(9);
      r.fitness = rng.uniform() * std::pow(10.0, rng.uniform(-4, 4));
    }
    // Oracle: per-membership sums in long double.
    std::map<GenomeId, std::pair<long double, long double>> bp, mod;
    for (const auto& r : records) {
      bp[r.blueprint_id].first += *r.fitness;
      bp[r.blueprint_id].second += 1;
      std::set<GenomeId> ms;
      for (const auto& [s, m] : r.module_choice) ms.insert(m);
      for (auto m : ms) {
        mod[m].first += *r.fitness;
        mod[m].second += 1;
      }
    }
    const auto got = attribute_fitness(records);
    const auto compare = [&](const auto& want, const std::map<GenomeId, double>& have) {
      if (want.size() != have.size()) ++key_mismatches;
      for (const auto& [id, e] : want) {
        const auto it = have.find(id);
        if (it == have.end()) {
          ++key_mismatches;
          continue;
        }
        const double v = static_cast<double>(e.first / e.second);
        worst = std::max(worst, std::abs(it->second - v) / std::max(1.0, std::abs(v)));
      }
    };
    compare(bp, got.blueprints);
    compare(mod, got.modules);
  }
  return {key_mismatches == 0 && worst <= 1e-12,
          fmt::format("1000 generations, max relative deviation {:.2e} (limit 1e-12)", worst)};
}

// --- 4 ----------------------------------------------------------------------

Outcome assembly_checks() {
  const auto space = support::mixed_space();
  const std::vector<SpeciesId> live{0, 1, 2, 3};
  Rng rng(404);
  InnovationRegistry bp_reg, mod_reg;
  std::size_t same_species = 0, soundness = 0, multiplicity = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto bp = support::grow_blueprint(space, live, bp_reg, rng, static_cast<int>(rng.index(15)));
    std::vector<ModuleChromosome> modules;
    for (SpeciesId s : live) {
      auto m = support::grow_module(space.without_globals(), mod_reg, rng, static_cast<int>(rng.index(8)));
      m.id = static_cast<GenomeId>(500 + s);
      modules.push_back(std::move(m));
    }
    std::map<SpeciesId, const ModuleChromosome*> choice;
    for (std::size_t k = 0; k < live.size(); ++k) choice[live[k]] = &modules[k];
    AssemblyOptions opts;
    opts.policy.method = rng.bernoulli(0.5) ? MergeMethod::concatenate : MergeMethod::element_wise_sum;
    const auto net = assemble(bp, choice, opts);

    std::map<InnovationId, SpeciesId> species_of;
    std::map<SpeciesId, std::size_t> pointers;
    for (const auto& n : bp.nodes)
      if (n.role == NodeRole::hidden && n.enabled) {
        species_of[n.innovation] = n.species;
        ++pointers[n.species];
      }
    for (const auto& l : net.layers)
      if (l.origin && l.kind != kinds::input && l.kind != kinds::output &&
          l.origin->module_id != choice.at(species_of.at(l.origin->blueprint_node))->id)
        ++same_species;
    // Every edge joins equal shapes, or feeds a merge that accounts for it.
    if (!check_network(net).empty()) ++soundness;
    for (const auto& l : net.layers) {
      const auto ps = net.parents(l.id);
      if (ps.size() > 1 && l.kind != kinds::merge) ++soundness;
      if (ps.size() == 1 && l.input_shape != net.layers[static_cast<std::size_t>(ps[0])].output_shape)
        ++soundness;
    }
    const auto copies = module_copies(net);
    for (const auto& [s, count] : pointers) {
      const auto* m = choice.at(s);
      if (active_hidden_nodes(*m).empty()) continue;
      const auto it = copies.find(m->id);
      if (it == copies.end() || it->second != count) ++multiplicity;
    }
  }
  return {same_species == 0 && soundness == 0 && multiplicity == 0,
          fmt::format("1000 blueprints; violations: same-species {}, size soundness {}, multiplicity {}",
                      same_species, soundness, multiplicity)};
}

// --- 5 ----------------------------------------------------------------------

Outcome gradient_check_all_kinds() {
  using S = HyperparameterSpec;
  const auto space = HyperparameterSpace::make(
      {S::integer("layer_size", 3, 6), S::categorical("layer_activation", {std::string("relu"), std::string("linear")})},
      {});
  const std::vector<SpeciesId> live{0, 1, 2};
  Rng rng(555);
  InnovationRegistry bp_reg, mod_reg;
  double worst = 0.0;
  std::set<std::string> seen;
  std::size_t checked = 0;
  const TaskKind tasks[] = {TaskKind::two_gaussians, TaskKind::xor_grid, TaskKind::spirals};
  for (int trial = 0; trial < 60; ++trial) {
    AssemblyOptions opts;
    opts.policy = {trial % 2 ? MergeMethod::element_wise_sum : MergeMethod::concatenate,
                   Downsample::dense_bottleneck};
    opts.input_shape = {2, 1, 1};
    opts.output_units = 2;
    AssembledNetwork net;
    if (trial < 30) {
      net = assemble(support::grow_module(space, mod_reg, rng, 6 + trial % 5), opts);
    } else {
      const auto bp = support::grow_blueprint(space, live, bp_reg, rng, 4);
      std::vector<ModuleChromosome> modules;
      for (SpeciesId s : live) {
        auto m = support::grow_module(space, mod_reg, rng, 3);
        m.id = static_cast<GenomeId>(10 + s);
        modules.push_back(std::move(m));
      }
      std::map<SpeciesId, const ModuleChromosome*> choice;
      for (std::size_t k = 0; k < live.size(); ++k) choice[live[k]] = &modules[k];
      net = assemble(bp, choice, opts);
    }
    for (const auto& l : net.layers) {
      seen.insert(l.kind);
      if (l.kind == kinds::merge) seen.insert("merge:" + to_string(l.params.at("method")));
      if (l.kind == kinds::dense && l.params.count("layer_activation"))
        seen.insert("activation:" + to_string(l.params.at("layer_activation")));
    }
    const auto task = synthetic_task(tasks[trial % 3], 200, static_cast<std::uint64_t>(trial));
    const auto r = gradient_check(net, task, {1e-5, 16, static_cast<std::uint64_t>(trial), false});
    worst = std::max(worst, r.max_relative_error);
    ++checked;
  }
  const std::vector<std::string> required{kinds::dense,        kinds::bottleneck,          kinds::merge,
                                          "merge:concatenate", "merge:element_wise_sum", "activation:relu",
                                          "activation:linear"};
  std::size_t missing = 0;
  for (const auto& k : required) missing += seen.count(k) ? 0 : 1;
  return {worst < 1e-4 && missing == 0,
          fmt::format("{} networks, max relative error {:.2e} (limit 1e-4), {} of {} kinds covered", checked,
                      worst, required.size() - missing, required.size())};
}

// --- 6 ----------------------------------------------------------------------

// Best surrogate fitness over n networks drawn without evolution: each is a
// fresh minimal genome grown by a uniform number of random structural steps.
double random_search_best(const EvolutionConfig& config, std::size_t n, std::uint64_t seed) {
  const auto evaluator = evaluator_for(config);
  Rng rng(seed ^ 0x5eed);
  InnovationRegistry registry;
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto m = minimal_chromosome(config.space, rng);
    const auto steps = rng.index(16);
    for (std::size_t s = 0; s < steps; ++s)
      m = rng.bernoulli(0.6) ? mutate_add_node(m, config.space, registry, rng).chromosome
                             : mutate_add_edge(m, registry, rng).chromosome;
    const auto net = assemble(m, config.co.assembly);
    best = std::max(best, evaluator->evaluate(net, config.co.budget).fitness);
  }
  return best;
}

Outcome surrogate_efficacy() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> evolved, random;
  bool beats_all = true;
  for (auto seed : kSeeds) {
    const auto config = parse_config({{"preset", "surrogate-demo"}, {"seed", seed}});
    auto state = start_run(config);
    InProcessBackend backend(evaluator_for(config), config.co.fitness_floor);
    std::size_t evaluations = 0;
    while (state.generation < 30) evaluations += advance(state, backend).evaluations;
    evolved.push_back(state.best ? state.best->fitness : 0.0);
    random.push_back(random_search_best(config, evaluations, seed));
    beats_all = beats_all && evolved.back() > random.back();
  }
  const double med = median(evolved), elapsed = seconds_since(t0);
  return {med >= 0.9 && beats_all && elapsed < 600.0,
          fmt::format("median best {:.4f} (limit 0.9); per seed [{}] vs random search [{}]; {:.1f}s", med,
                      join(evolved), join(random), elapsed)};
}

// --- 7 ----------------------------------------------------------------------

Outcome trainable_evolution() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> best;
  std::size_t passing = 0;
  for (auto seed : kSeeds) {
    const auto config = parse_config({{"preset", "dense-demo"}, {"seed", seed}});
    auto state = start_run(config);
    InProcessBackend backend(evaluator_for(config), config.co.fitness_floor);
    while (state.generation < 20) advance(state, backend);
    best.push_back(state.best ? state.best->fitness : 0.0);
    passing += best.back() >= 0.95 ? 1 : 0;
  }
  const double elapsed = seconds_since(t0);
  return {passing == kSeeds.size() && elapsed < 900.0,
          fmt::format("{}/5 seeds >= 0.95 validation accuracy [{}]; {:.1f}s (limit 900s)", passing, join(best),
                      elapsed)};
}

// --- 8 ----------------------------------------------------------------------

Outcome structure_at_toy_scale() {
  std::size_t repeated = 0;
  bool all_records = true;
  std::vector<double> copies_per_seed;
  for (auto seed : kSeeds) {
    const auto config = parse_config({{"preset", "cifar10"}, {"seed", seed}});
    auto state = start_run(config);
    InProcessBackend backend(evaluator_for(config), config.co.fitness_floor);
    std::size_t records = 0;
    while (state.generation < 5) {
      advance(state, backend);
      records += state.last_records.size();
    }
    all_records = all_records && records == 500;
    std::size_t most = 0;
    if (state.best)
      for (const auto& [id, n] : module_copies(state.best->network)) most = std::max(most, n);
    copies_per_seed.push_back(static_cast<double>(most));
    repeated += most >= 2 ? 1 : 0;
  }
  std::string copies;
  for (double c : copies_per_seed) copies += fmt::format("{}{}", copies.empty() ? "" : " ", c);
  return {all_records && repeated >= 3,
          fmt::format("500 records per seed: {}; best network reuses a module in {}/5 seeds (need 3), "
                      "max copies [{}]",
                      all_records ? "yes" : "no", repeated, copies)};
}

// --- 9 ----------------------------------------------------------------------

Outcome determinism_and_resume() {
  const auto dir = scratch("determinism");
  const auto run = [&](const fs::path& out, int generations) {
    const auto config = parse_config({{"preset", "surrogate-demo"}, {"seed", 7}});
    auto state = start_run(config);
    InProcessBackend backend(evaluator_for(config));
    run_until(state, backend, generations, RunWriter(out));
  };
  run(dir / "a", 10);
  run(dir / "b", 10);
  const bool identical = slurp(dir / "a" / "checkpoint.json") == slurp(dir / "b" / "checkpoint.json");

  run(dir / "c", 5);
  auto state = load_checkpoint_file(dir / "c" / "checkpoint.json");
  InProcessBackend backend(evaluator_for(state.config));
  run_until(state, backend, 10, RunWriter(dir / "c"));
  const bool resumed = slurp(dir / "a" / "checkpoint.json") == slurp(dir / "c" / "checkpoint.json") &&
                       slurp(dir / "a" / "fitness.csv") == slurp(dir / "c" / "fitness.csv");
  return {identical && resumed, fmt::format("byte-identical checkpoints: {}; resume at 5 equals straight run: {}",
                                            identical ? "yes" : "no", resumed ? "yes" : "no")};
}

// --- 10 ---------------------------------------------------------------------

Outcome distributed_equivalence() {
  const auto config = parse_config({{"preset", "cifar10"}, {"seed", 10}});
  Rng rng(10);
  auto co = initialize_copopulations(config.space, config.co, rng);
  std::vector<EvalRequest> requests;
  for (auto& r : sample_assemblies(co, config.co.assembly_count, rng)) {
    r.network_id = co.next_network_id++;
    requests.push_back({assemble_record(co, r, config.co.assembly), config.co.budget});
  }
  const auto evaluator = evaluator_for(config);
  InProcessBackend local(evaluator);
  const auto expected = local.evaluate_all(requests);
  const auto multiset = [](const std::vector<FitnessReport>& rs) {
    std::vector<double> f;
    for (const auto& r : rs) f.push_back(r.fitness);
    std::sort(f.begin(), f.end());
    return f;
  };

  MasterOptions opts;
  opts.poll_interval = 0.005;
  Master plain(opts);
  std::vector<FitnessReport> distributed;
  {
    LocalWorkerPool pool(plain, 4, evaluator);
    DistributedBackend backend(plain, evaluator);
    distributed = backend.evaluate_all(requests);
  }
  const bool same = multiset(distributed) == multiset(expected);

  Master faulty(opts);
  std::vector<FitnessReport> survived;
  {
    LocalWorkerPool pool(faulty, 4, evaluator, {{2, 7}});
    DistributedBackend backend(faulty, evaluator);
    survived = backend.evaluate_all(requests);
  }
  std::set<std::uint64_t> ids;
  std::size_t failed = 0;
  for (const auto& r : survived) {
    ids.insert(r.network_id);
    failed += r.failed ? 1 : 0;
  }
  const bool exactly_once = survived.size() == requests.size() && ids.size() == requests.size() && failed == 0 &&
                            multiset(survived) == multiset(expected);
  return {same && exactly_once && faulty.requeued_jobs() >= 1,
          fmt::format("{} jobs: 4-worker multiset equal: {}; with a worker killed on its 7th job: {} reports, {} "
                      "distinct, {} failed, {} re-queued",
                      requests.size(), same ? "yes" : "no", survived.size(), ids.size(), failed,
                      faulty.requeued_jobs())};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"invariant suite and mutation-closure fuzz", invariant_suite},
      {"crossover alignment oracle", alignment_oracle},
      {"fitness attribution oracle", attribution_oracle},
      {"assembly structure checks", assembly_checks},
      {"gradient check", gradient_check_all_kinds},
      {"surrogate evolution efficacy", surrogate_efficacy},
      {"trainable network evolution", trainable_evolution},
      {"cifar10 population sizes at toy scale", structure_at_toy_scale},
      {"determinism and resume", determinism_and_resume},
      {"distributed equivalence and fault injection", distributed_equivalence},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << " ("
              << o.detail << ")" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
