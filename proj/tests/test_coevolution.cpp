#include <doctest.h>

#include <set>

#include "codeepneat/config.hpp"
#include "codeepneat/run.hpp"
#include "support.hpp"

using namespace codeepneat;

namespace {

EvolutionConfig demo_config(std::uint64_t seed) {
  return parse_config({{"preset", "surrogate-demo"}, {"seed", seed}});
}

EvolutionConfig cifar_config(std::uint64_t seed) {
  return parse_config({{"preset", "cifar10"}, {"seed", seed}});
}

// Per-membership means in long double, written without compensated sums.
Attribution oracle(const std::vector<AssemblyRecord>& records) {
  std::map<GenomeId, std::pair<long double, std::size_t>> bp, mod;
  for (const auto& r : records) {
    auto& b = bp[r.blueprint_id];
    b.first += *r.fitness;
    ++b.second;
    std::set<GenomeId> modules;
    for (const auto& [s, m] : r.module_choice) modules.insert(m);
    for (auto m : modules) {
      auto& e = mod[m];
      e.first += *r.fitness;
      ++e.second;
    }
  }
  Attribution a;
  for (const auto& [id, e] : bp) a.blueprints[id] = static_cast<double>(e.first / e.second);
  for (const auto& [id, e] : mod) a.modules[id] = static_cast<double>(e.first / e.second);
  return a;
}

class FlakyEvaluator final : public Evaluator {
 public:
  FitnessReport evaluate(const AssembledNetwork& net, const EvaluationBudget&) const override {
    if (net.provenance.network_id % 3 == 0) throw std::runtime_error("simulated crash");
    return {net.provenance.network_id, 0.5, json::object(), false};
  }
  bool deterministic() const override { return true; }
  std::set<std::string> capabilities() const override { return {}; }
  json describe() const override { return {{"kind", "flaky"}}; }
};

}  // namespace

TEST_SUITE("coevolution") {
  TEST_CASE("round-robin uses each of 25 blueprints four times") {
    const auto config = cifar_config(1);
    Rng rng(1);
    auto co = initialize_copopulations(config.space, config.co, rng);
    REQUIRE(co.blueprints.size() == 25);
    REQUIRE(co.modules.size() == 45);
    const auto records = sample_assemblies(co, 100, rng);
    REQUIRE(records.size() == 100);
    std::map<GenomeId, int> uses;
    for (const auto& r : records) ++uses[r.blueprint_id];
    CHECK(uses.size() == 25);
    for (const auto& [id, n] : uses) CHECK(n == 4);
  }

  TEST_CASE("uneven counts differ by at most one") {
    const auto config = demo_config(2);
    Rng rng(2);
    auto co = initialize_copopulations(config.space, config.co, rng);
    const auto records = sample_assemblies(co, 47, rng);
    std::map<GenomeId, int> uses;
    for (const auto& r : records) ++uses[r.blueprint_id];
    int lo = 1 << 30, hi = 0;
    for (const auto& [id, n] : uses) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    CHECK(uses.size() == co.blueprints.size());
    CHECK(hi - lo <= 1);
  }

  TEST_CASE("one module per species pointer") {
    const auto config = demo_config(3);
    Rng rng(3);
    auto co = initialize_copopulations(config.space, config.co, rng);
    // Grow the blueprints so that several nodes share a species.
    for (auto& s : co.blueprints.species)
      for (auto& m : s.members) {
        const auto id = m.id;
        m = support::grow_blueprint(config.space, co.modules.species_ids(), co.blueprint_registry, rng, 10);
        m.id = id;
      }
    for (int round = 0; round < 20; ++round) {
      for (const auto& r : sample_assemblies(co, 60, rng)) {
        const auto* bp = co.blueprints.find(r.blueprint_id);
        REQUIRE(bp != nullptr);
        std::set<SpeciesId> pointers;
        for (const auto& n : bp->nodes)
          if (n.role == NodeRole::hidden && n.enabled) pointers.insert(n.species);
        std::set<SpeciesId> keys;
        for (const auto& [s, m] : r.module_choice) {
          keys.insert(s);
          CHECK(co.modules.species_of(m) == s);
        }
        CHECK(keys == pointers);
        const auto net = assemble_record(co, r, config.co.assembly);
        for (const auto& l : net.layers)
          if (l.origin && l.kind != kinds::input && l.kind != kinds::output)
            CHECK(l.origin->module_id == r.module_choice.at(bp->node(l.origin->blueprint_node)->species));
      }
    }
  }

  TEST_CASE("nodes sharing one species share one module") {
    const auto config = demo_config(13);
    Rng rng(13);
    auto co = initialize_copopulations(config.space, config.co, rng);
    const auto target = co.modules.species_ids().back();
    for (auto& s : co.blueprints.species)
      for (auto& m : s.members) {
        const auto id = m.id;
        m = support::grow_blueprint(config.space, co.modules.species_ids(), co.blueprint_registry, rng, 12);
        m.id = id;
        for (auto& n : m.nodes)
          if (n.role == NodeRole::hidden) n.species = target;
      }
    // A blueprint whose hidden nodes were all bypassed has no pointers left.
    std::size_t pointed = 0;
    for (const auto& r : sample_assemblies(co, 30, rng)) {
      REQUIRE(r.module_choice.size() <= 1);
      if (r.module_choice.empty()) continue;
      ++pointed;
      CHECK(r.module_choice.begin()->first == target);
      const auto net = assemble_record(co, r, config.co.assembly);
      for (const auto& l : net.layers)
        if (l.origin && l.origin->module_id != 0) CHECK(l.origin->module_id == r.module_choice.at(target));
    }
    CHECK(pointed > 20);
  }

  TEST_CASE("a single blueprint and module fix the record") {
    auto config = demo_config(4);
    config.co.blueprints.population_size = 1;
    config.co.modules.population_size = 1;
    Rng rng(4);
    auto co = initialize_copopulations(config.space, config.co, rng);
    auto co2 = co;
    Rng other(99);
    const auto a = sample_assemblies(co, 3, rng);
    const auto b = sample_assemblies(co2, 3, other);
    CHECK(a == b);
    for (const auto& r : a) CHECK(r.module_choice.size() == 1);
  }

  TEST_CASE("dangling pointers are repaired and persisted") {
    const auto config = demo_config(5);
    Rng rng(5);
    auto co = initialize_copopulations(config.space, config.co, rng);
    auto& node = co.blueprints.species.front().members.front().nodes[2];
    node.species = 12345;
    CHECK(repair_species_pointers(co, rng) == 1);
    const auto live = co.modules.species_ids();
    CHECK(std::find(live.begin(), live.end(), node.species) != live.end());
    CHECK(repair_species_pointers(co, rng) == 0);
  }

  TEST_CASE("attribution examples") {
    std::vector<AssemblyRecord> records{{1, 10, {{0, 100}}, 0.5, false}, {2, 11, {{0, 100}}, 0.7, false}};
    const auto a = attribute_fitness(records);
    CHECK(a.modules.at(100) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(a.blueprints.at(10) == 0.5);
    CHECK(a.blueprints.at(11) == 0.7);
    CHECK_THROWS_AS(attribute_fitness({}), std::invalid_argument);
    records[1].fitness.reset();
    CHECK_THROWS_AS(attribute_fitness(records), std::invalid_argument);
  }

  TEST_CASE("attribution matches the membership oracle") {
    Rng rng(6);
    for (int gen = 0; gen < 1000; ++gen) {
      std::vector<AssemblyRecord> records;
      const auto n = 1 + rng.index(60);
      for (std::size_t k = 0; k < n; ++k) {
        AssemblyRecord r;
        r.network_id = k + 1;
        r.blueprint_id = 1 + rng.index(10);
        const auto species = 1 + rng.index(4);
        for (std::size_t s = 0; s < species; ++s)
          r.module_choice[static_cast<SpeciesId>(s)] = 100 + 10 * s + rng.index(5);
        r.fitness = rng.uniform() * std::pow(10.0, rng.uniform(-3, 3));
        records.push_back(std::move(r));
      }
      const auto got = attribute_fitness(records);
      const auto want = oracle(records);
      REQUIRE(got.blueprints.size() == want.blueprints.size());
      REQUIRE(got.modules.size() == want.modules.size());
      for (const auto& [id, v] : want.blueprints)
        CHECK(std::abs(got.blueprints.at(id) - v) <= 1e-12 * std::max(1.0, std::abs(v)));
      for (const auto& [id, v] : want.modules)
        CHECK(std::abs(got.modules.at(id) - v) <= 1e-12 * std::max(1.0, std::abs(v)));
    }
  }

  TEST_CASE("compensated sum recovers cancelled terms") {
    CHECK(compensated_sum({1.0, 1e100, 1.0, -1e100}) == 2.0);
    CHECK(compensated_sum({}) == 0.0);
  }

  TEST_CASE("unevaluated members inherit species, then population means") {
    const auto space = support::mixed_space();
    Rng rng(7);
    Population<ModuleChromosome> pop;
    Species<ModuleChromosome> s0, s1;
    s0.id = 0;
    s1.id = 1;
    for (GenomeId id : {1, 2, 3}) {
      auto c = minimal_chromosome(space, rng);
      c.id = id;
      s0.members.push_back(c);
    }
    auto c = minimal_chromosome(space, rng);
    c.id = 4;
    s1.members.push_back(c);
    pop.species = {s0, s1};
    const auto f = fill_unevaluated(pop, {{1, 0.2}, {2, 0.4}}, 0.0);
    CHECK(f.at(1) == 0.2);
    CHECK(f.at(3) == doctest::Approx(0.3));
    CHECK(f.at(4) == doctest::Approx(0.3));
    const auto none = fill_unevaluated(pop, {}, -1.0);
    for (GenomeId id : {1, 2, 3, 4}) CHECK(none.at(id) == -1.0);
  }

  TEST_CASE("cifar10 sizes run two generations") {
    const auto config = cifar_config(8);
    Rng rng(8);
    auto co = initialize_copopulations(config.space, config.co, rng);
    InProcessBackend backend(evaluator_for(config));
    std::size_t records = 0;
    for (int g = 0; g < 2; ++g) {
      const auto r = evolve_generation(co, config.space, config.co, backend, rng);
      records += r.records.size();
      for (const auto& rec : r.records) CHECK(rec.fitness.has_value());
      CHECK(co.blueprints.size() == 25);
      CHECK(co.modules.size() == 45);
      CHECK(co.blueprints.generation == co.modules.generation);
    }
    CHECK(records == 200);
  }

  TEST_CASE("evaluator failures become the floor") {
    auto config = demo_config(9);
    config.co.fitness_floor = 0.0;
    Rng rng(9);
    auto co = initialize_copopulations(config.space, config.co, rng);
    InProcessBackend backend(std::make_shared<FlakyEvaluator>());
    const auto r = evolve_generation(co, config.space, config.co, backend, rng);
    std::size_t failed = 0;
    for (const auto& rec : r.records) {
      if (rec.network_id % 3 == 0) {
        CHECK(rec.failed);
        CHECK(*rec.fitness == 0.0);
        ++failed;
      } else {
        CHECK(*rec.fitness == 0.5);
      }
    }
    CHECK(failed > 0);
  }

  TEST_CASE("same seed gives byte-identical populations") {
    const auto run = [](std::uint64_t seed) {
      const auto config = demo_config(seed);
      Rng rng(seed);
      auto co = initialize_copopulations(config.space, config.co, rng);
      InProcessBackend backend(evaluator_for(config));
      for (int g = 0; g < 5; ++g) evolve_generation(co, config.space, config.co, backend, rng);
      return to_json(co).dump() + rng.state();
    };
    CHECK(run(10) == run(10));
  }

  TEST_CASE("best so far never falls and the elite blueprint survives") {
    const auto config = demo_config(11);
    Rng rng(11);
    auto co = initialize_copopulations(config.space, config.co, rng);
    InProcessBackend backend(evaluator_for(config));
    double best_so_far = 0.0;
    for (int g = 0; g < 20; ++g) {
      const auto before = co.blueprints;
      const auto r = evolve_generation(co, config.space, config.co, backend, rng);
      CHECK(std::max(best_so_far, r.best_fitness) >= best_so_far);
      best_so_far = std::max(best_so_far, r.best_fitness);
      // The blueprint of the best network is its species' elite, unless
      // another member of its species scored higher.
      const auto& best_record = *std::find_if(r.records.begin(), r.records.end(), [&](const auto& x) {
        return x.network_id == r.best_network_id;
      });
      const auto attribution = attribute_fitness(r.records);
      const auto sid = *before.species_of(best_record.blueprint_id);
      GenomeId elite = 0;
      double elite_f = -1.0;
      for (const auto& s : before.species)
        if (s.id == sid)
          for (const auto& m : s.members) {
            const auto it = attribution.blueprints.find(m.id);
            const double f = it == attribution.blueprints.end() ? -1.0 : it->second;
            if (f > elite_f || (f == elite_f && m.id < elite)) {
              elite = m.id;
              elite_f = f;
            }
          }
      const auto* kept = co.blueprints.find(elite);
      if (kept != nullptr) CHECK(*kept == *before.find(elite));
    }
    CHECK(best_so_far > 0.5);
  }

  TEST_CASE("copopulation JSON round trip") {
    const auto config = demo_config(12);
    Rng rng(12);
    auto co = initialize_copopulations(config.space, config.co, rng);
    InProcessBackend backend(evaluator_for(config));
    evolve_generation(co, config.space, config.co, backend, rng);
    const auto text = to_json(co).dump();
    CHECK(to_json(copopulations_from_json(json::parse(text), config.space)).dump() == text);
  }

  TEST_CASE("assembly record JSON round trip") {
    const AssemblyRecord r{7, 3, {{0, 11}, {4, 19}}, 0.25, true};
    CHECK(assembly_record_from_json(to_json(r)) == r);
  }
}
