#include <doctest.h>

#include <set>

#include "codeepneat/speciation.hpp"
#include "support.hpp"

using namespace codeepneat;

namespace {

Mutator<ModuleChromosome> identity_mutator() {
  return [](ModuleChromosome c, Rng&) { return c; };
}

Mutator<ModuleChromosome> real_mutator(const HyperparameterSpace& space, InnovationRegistry& registry) {
  MutationRates rates;
  rates.add_node = 0.2;
  rates.add_edge = 0.2;
  return [&space, &registry, rates](ModuleChromosome c, Rng& rng) {
    return mutate_module(std::move(c), space, registry, rates, rng);
  };
}

// Deterministic structural fitness.
double structural_fitness(const ModuleChromosome& c) {
  double f = 0.0;
  for (const auto& n : c.nodes)
    if (n.enabled) f += 1.0;
  return f / (1.0 + f) + 0.001 * static_cast<double>(c.edges.size() % 7);
}

template <class C>
FitnessMap score(const Population<C>& pop, const std::function<double(const C&)>& f) {
  FitnessMap out;
  for (const auto* m : pop.members()) out[m->id] = f(*m);
  return out;
}

std::set<GenomeId> member_ids(const Population<ModuleChromosome>& pop, std::size_t& total) {
  std::set<GenomeId> ids;
  total = 0;
  for (const auto* m : pop.members()) {
    ids.insert(m->id);
    ++total;
  }
  return ids;
}

}  // namespace

TEST_SUITE("speciation") {
  TEST_CASE("identical individuals form one species") {
    const auto space = support::mixed_space();
    Rng rng(1);
    const auto c = minimal_chromosome(space, rng);
    SpeciesId next = 0;
    const auto species = speciate(std::vector<ModuleChromosome>(10, c), {}, 0.6, {}, next);
    REQUIRE(species.size() == 1);
    CHECK(species[0].members.size() == 10);
  }

  TEST_CASE("a threshold above every distance gives one species") {
    const auto space = support::mixed_space();
    Rng rng(2);
    InnovationRegistry registry;
    std::vector<ModuleChromosome> pop;
    for (int i = 0; i < 20; ++i) pop.push_back(support::grow_module(space, registry, rng, 15));
    double max_d = 0.0;
    for (const auto& a : pop)
      for (const auto& b : pop) max_d = std::max(max_d, compatibility_distance(a, b, {}));
    SpeciesId next = 0;
    CHECK(speciate(pop, {}, max_d + 1.0, {}, next).size() == 1);
  }

  TEST_CASE("two distant clusters form two species") {
    const auto space = support::mixed_space();
    Rng rng(3);
    InnovationRegistry registry;
    const auto a = minimal_chromosome(space, rng);
    auto b = a;
    for (int i = 0; i < 40; ++i) b = mutate_add_node(b, space, registry, rng).chromosome;
    const CompatibilityCoefficients k{10.0, 10.0, 0.4};
    REQUIRE(compatibility_distance(a, b, k) > 1.0);
    std::vector<ModuleChromosome> pop;
    for (int i = 0; i < 5; ++i) {
      pop.push_back(a);
      pop.push_back(b);
    }
    SpeciesId next = 0;
    const auto species = speciate(pop, {}, 1.0, k, next);
    REQUIRE(species.size() == 2);
    CHECK(species[0].members.size() == 5);
    CHECK(species[1].members.size() == 5);
  }

  TEST_CASE("allocation examples") {
    const SpeciesShare one[] = {{4, 3.0, true}};
    CHECK(allocate_offspring(one, 30).at(4) == 30);

    const SpeciesShare two[] = {{0, 2.0, true}, {1, 1.0, true}};
    const auto a = allocate_offspring(two, 30);
    CHECK(a.at(0) == 20);
    CHECK(a.at(1) == 10);

    const SpeciesShare zero[] = {{0, 0.0, true}, {1, 0.0, true}, {2, 0.0, true}};
    const auto z = allocate_offspring(zero, 9);
    CHECK(z.at(0) == 3);
    CHECK(z.at(1) == 3);
    CHECK(z.at(2) == 3);

    const SpeciesShare stale[] = {{0, 1.0, true}, {1, 5.0, false}};
    const auto s = allocate_offspring(stale, 10);
    CHECK(s.at(0) == 10);
    CHECK(s.at(1) == 0);
  }

  TEST_CASE("allocation sums to the total") {
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
      std::vector<SpeciesShare> shares;
      const auto n = 1 + rng.index(8);
      for (std::size_t k = 0; k < n; ++k)
        shares.push_back({static_cast<SpeciesId>(k), rng.bernoulli(0.1) ? 0.0 : rng.uniform(0, 5),
                          rng.bernoulli(0.8)});
      const auto total = n + rng.index(100);
      const auto alloc = allocate_offspring(shares, total);
      std::size_t sum = 0;
      bool any_eligible = false;
      for (const auto& s : shares) any_eligible = any_eligible || s.eligible;
      for (const auto& s : shares) {
        sum += alloc.at(s.id);
        if (s.eligible || !any_eligible) CHECK(alloc.at(s.id) >= 1);
        if (!s.eligible && any_eligible) CHECK(alloc.at(s.id) == 0);
      }
      CHECK(sum == total);
    }
  }

  TEST_CASE("elitism keeps the best unchanged") {
    const auto space = support::mixed_space();
    Rng rng(5);
    InnovationRegistry registry;
    ReproductionConfig config;
    config.population_size = 12;
    config.threshold = 1e9;
    auto pop = initialize_population<ModuleChromosome>(
        12, [&](Rng& r) { return support::grow_module(space, registry, r, 6); }, config, rng);
    REQUIRE(pop.species.size() == 1);
    const auto fitness = score<ModuleChromosome>(pop, structural_fitness);
    const auto stats = summarize(pop, fitness);
    const auto best = *pop.find(stats.best_id);
    const auto next = reproduce(pop, fitness, config, real_mutator(space, registry), registry, rng);
    const auto* kept = next.find(best.id);
    REQUIRE(kept != nullptr);
    CHECK(*kept == best);
  }

  TEST_CASE("missing fitness names the chromosome") {
    const auto space = support::mixed_space();
    Rng rng(6);
    InnovationRegistry registry;
    ReproductionConfig config;
    config.population_size = 4;
    auto pop = initialize_population<ModuleChromosome>(
        4, [&](Rng& r) { return minimal_chromosome(space, r); }, config, rng);
    auto fitness = score<ModuleChromosome>(pop, structural_fitness);
    const auto victim = pop.members().back()->id;
    fitness.erase(victim);
    try {
      reproduce(pop, fitness, config, identity_mutator(), registry, rng);
      FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find(std::to_string(victim)) != std::string::npos);
    }
  }

  TEST_CASE("a stagnant species goes extinct after the stale limit") {
    const auto space = support::mixed_space();
    Rng rng(7);
    InnovationRegistry registry;
    const auto a = minimal_chromosome(space, rng);
    auto b = a;
    for (int i = 0; i < 30; ++i) b = mutate_add_node(b, space, registry, rng).chromosome;
    ReproductionConfig config;
    config.population_size = 10;
    config.threshold = 1.0;
    config.coefficients = {10.0, 10.0, 0.0};
    int made = 0;
    auto pop = initialize_population<ModuleChromosome>(
        10, [&](Rng&) { return made++ % 2 ? b : a; }, config, rng);
    REQUIRE(pop.species.size() == 2);
    const auto weak = pop.species[1].id;
    const auto fit = [&](const ModuleChromosome& c) { return c.nodes.size() == 3 ? 1.0 : 0.5; };
    // First call records the best; each later call adds a stale generation.
    for (int call = 1; call <= 16; ++call) {
      const auto fitness = score<ModuleChromosome>(pop, fit);
      pop = reproduce(pop, fitness, config, identity_mutator(), registry, rng);
      const bool alive = std::any_of(pop.species.begin(), pop.species.end(),
                                     [&](const auto& s) { return s.id == weak; });
      if (call <= 15)
        CHECK(alive);
      else
        CHECK_FALSE(alive);
      CHECK(pop.size() == 10);
    }
  }

  TEST_CASE("the stale species holding the global best survives") {
    const auto space = support::mixed_space();
    Rng rng(8);
    InnovationRegistry registry;
    ReproductionConfig config;
    config.population_size = 6;
    config.stale_limit = 2;
    config.threshold = 1e9;
    auto pop = initialize_population<ModuleChromosome>(
        6, [&](Rng& r) { return minimal_chromosome(space, r); }, config, rng);
    for (int i = 0; i < 6; ++i) {
      const auto fitness = score<ModuleChromosome>(pop, [](const auto&) { return 1.0; });
      pop = reproduce(pop, fitness, config, identity_mutator(), registry, rng);
      CHECK(pop.size() == 6);
    }
  }

  TEST_CASE("population size and membership are conserved") {
    const auto space = support::mixed_space();
    Rng rng(9);
    for (int run = 0; run < 100; ++run) {
      InnovationRegistry registry;
      ReproductionConfig config;
      config.population_size = 5 + rng.index(20);
      config.threshold = rng.uniform(0.2, 1.5);
      config.elitism = rng.index(3);
      auto pop = initialize_population<ModuleChromosome>(
          config.population_size, [&](Rng& r) { return support::grow_module(space, registry, r, 4); },
          config, rng);
      const auto mutate = real_mutator(space, registry);
      for (int gen = 0; gen < 3; ++gen) {
        FitnessMap fitness;
        for (const auto* m : pop.members()) fitness[m->id] = rng.uniform();
        pop = reproduce(pop, fitness, config, mutate, registry, rng);
        std::size_t total = 0;
        const auto ids = member_ids(pop, total);
        CHECK(total == config.population_size);
        CHECK(ids.size() == total);
        for (const auto& s : pop.species) CHECK_FALSE(s.members.empty());
      }
    }
  }

  TEST_CASE("best fitness never decreases with elitism") {
    const auto space = support::mixed_space();
    Rng rng(10);
    InnovationRegistry registry;
    ReproductionConfig config;
    config.population_size = 20;
    auto pop = initialize_population<ModuleChromosome>(
        20, [&](Rng& r) { return minimal_chromosome(space, r); }, config, rng);
    const auto mutate = real_mutator(space, registry);
    const std::function<std::vector<double>(const std::vector<const ModuleChromosome*>&)> evaluate =
        [](const std::vector<const ModuleChromosome*>& ms) {
          std::vector<double> f;
          for (const auto* m : ms) f.push_back(structural_fitness(*m));
          return f;
        };
    double best = -1.0;
    for (int gen = 0; gen < 20; ++gen) {
      auto step = deepneat_generation(pop, evaluate, config, mutate, registry, rng);
      CHECK(step.stats.best_fitness >= best);
      best = step.stats.best_fitness;
      pop = std::move(step.next);
    }
  }

  TEST_CASE("same seed gives the same trajectory") {
    const auto space = support::mixed_space();
    const auto run = [&](std::uint64_t seed) {
      Rng rng(seed);
      InnovationRegistry registry;
      ReproductionConfig config;
      config.population_size = 15;
      auto pop = initialize_population<ModuleChromosome>(
          15, [&](Rng& r) { return minimal_chromosome(space, r); }, config, rng);
      const auto mutate = real_mutator(space, registry);
      for (int gen = 0; gen < 8; ++gen)
        pop = reproduce(pop, score<ModuleChromosome>(pop, structural_fitness), config, mutate,
                        registry, rng);
      return to_json(pop).dump();
    };
    CHECK(run(11) == run(11));
    CHECK(run(11) != run(12));
  }

  TEST_CASE("population JSON round trip") {
    const auto space = support::mixed_space();
    Rng rng(12);
    InnovationRegistry registry;
    ReproductionConfig config;
    config.population_size = 10;
    auto pop = initialize_population<ModuleChromosome>(
        10, [&](Rng& r) { return support::grow_module(space, registry, r, 5); }, config, rng);
    pop = reproduce(pop, score<ModuleChromosome>(pop, structural_fitness), config,
                    real_mutator(space, registry), registry, rng);
    CHECK(module_population_from_json(to_json(pop), space) == pop);

    const std::vector<SpeciesId> live{0, 1};
    auto bps = initialize_population<BlueprintChromosome>(
        6, [&](Rng& r) { return support::grow_blueprint(space, live, registry, r, 5); }, config, rng);
    CHECK(blueprint_population_from_json(to_json(bps), space) == bps);
  }
}
