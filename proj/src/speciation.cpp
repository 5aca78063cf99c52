#include "codeepneat/speciation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace codeepneat {

template <class C>
std::size_t Population<C>::size() const {
  std::size_t n = 0;
  for (const auto& s : species) n += s.members.size();
  return n;
}

template <class C>
std::vector<const C*> Population<C>::members() const {
  std::vector<const C*> out;
  for (const auto& s : species)
    for (const auto& m : s.members) out.push_back(&m);
  return out;
}

template <class C>
const C* Population<C>::find(GenomeId id) const {
  for (const auto& s : species)
    for (const auto& m : s.members)
      if (m.id == id) return &m;
  return nullptr;
}

template <class C>
std::vector<SpeciesId> Population<C>::species_ids() const {
  std::vector<SpeciesId> out;
  for (const auto& s : species) out.push_back(s.id);
  return out;
}

template <class C>
std::optional<SpeciesId> Population<C>::species_of(GenomeId id) const {
  for (const auto& s : species)
    for (const auto& m : s.members)
      if (m.id == id) return s.id;
  return std::nullopt;
}

ModuleChromosome mutate_module(ModuleChromosome c, const HyperparameterSpace& space,
                               InnovationRegistry& registry, const MutationRates& rates, Rng& rng) {
  if (rng.bernoulli(rates.add_node)) c = mutate_add_node(c, space, registry, rng).chromosome;
  if (rng.bernoulli(rates.add_edge)) c = mutate_add_edge(c, registry, rng).chromosome;
  if (rng.bernoulli(rates.toggle_connection)) c = toggle_layer_connection(c, rng).chromosome;
  if (count_active_lstm(c) >= 2 && rng.bernoulli(rates.skip_connection))
    c = mutate_skip_connection(c, registry, rng).chromosome;
  return mutate_parameters(c, rates.table, rates.per_param, rng);
}

BlueprintChromosome mutate_blueprint(BlueprintChromosome c, std::span<const SpeciesId> live_species,
                                     InnovationRegistry& registry, const MutationRates& rates,
                                     Rng& rng) {
  if (!live_species.empty() && rng.bernoulli(rates.add_node))
    c = mutate_add_node(c, live_species, registry, rng).chromosome;
  if (rng.bernoulli(rates.add_edge)) c = mutate_add_edge(c, registry, rng).chromosome;
  if (rng.bernoulli(rates.toggle_connection)) c = toggle_layer_connection(c, rng).chromosome;
  c = mutate_globals(c, rates.table, rates.per_param, rng);
  return mutate_species_pointers(c, live_species, rates.species_pointer, rng);
}

template <class C>
std::vector<Species<C>> speciate(std::vector<C> individuals, const std::vector<Species<C>>& prior,
                                 double threshold, const CompatibilityCoefficients& coefficients,
                                 SpeciesId& next_species_id) {
  if (!(threshold > 0.0)) throw std::invalid_argument("speciation threshold must be positive");
  std::vector<Species<C>> out;
  out.reserve(prior.size());
  for (const auto& p : prior) {
    Species<C> s = p;
    s.members.clear();
    out.push_back(std::move(s));
  }
  for (auto& ind : individuals) {
    bool placed = false;
    for (auto& s : out) {
      if (compatibility_distance(ind, s.representative, coefficients) < threshold) {
        s.members.push_back(std::move(ind));
        placed = true;
        break;
      }
    }
    if (!placed) {
      Species<C> s;
      s.id = next_species_id++;
      s.representative = ind;
      s.members.push_back(std::move(ind));
      out.push_back(std::move(s));
    }
  }
  std::erase_if(out, [](const Species<C>& s) { return s.members.empty(); });
  for (auto& s : out) s.representative = s.members.front();
  return out;
}

std::map<SpeciesId, std::size_t> allocate_offspring(std::span<const SpeciesShare> shares,
                                                   std::size_t total) {
  std::map<SpeciesId, std::size_t> result;
  std::vector<const SpeciesShare*> eligible;
  for (const auto& s : shares) {
    if (!std::isfinite(s.mass)) throw std::invalid_argument("species fitness mass is not finite");
    result[s.id] = 0;
    if (s.eligible) eligible.push_back(&s);
  }
  if (eligible.empty())
    for (const auto& s : shares) eligible.push_back(&s);
  if (eligible.empty()) return result;
  if (total < eligible.size())
    throw std::invalid_argument("offspring total smaller than the number of live species");

  std::vector<double> weight;
  for (const auto* s : eligible) weight.push_back(std::max(0.0, s->mass));
  double sum = std::accumulate(weight.begin(), weight.end(), 0.0);
  if (!(sum > 0.0)) {
    std::fill(weight.begin(), weight.end(), 1.0);
    sum = static_cast<double>(weight.size());
  }

  const std::size_t n = eligible.size();
  std::vector<std::size_t> alloc(n);
  std::vector<double> remainder(n);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = static_cast<double>(total) * weight[i] / sum;
    alloc[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - std::floor(quota);
    assigned += alloc[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  // Floating-point rounding can leave assigned slightly above or below total.
  for (std::size_t k = 0; assigned < total; k = (k + 1) % n, ++assigned) ++alloc[order[k]];
  while (assigned > total) {
    auto it = std::max_element(alloc.begin(), alloc.end());
    --*it;
    --assigned;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (alloc[i] > 0) continue;
    auto donor = std::max_element(alloc.begin(), alloc.end());
    --*donor;
    ++alloc[i];
  }
  for (std::size_t i = 0; i < n; ++i) result[eligible[i]->id] = alloc[i];
  return result;
}

template <class C>
Population<C> initialize_population(std::size_t size, const std::function<C(Rng&)>& factory,
                                    const ReproductionConfig& config, Rng& rng) {
  if (size == 0) throw std::invalid_argument("population size must be at least 1");
  Population<C> pop;
  std::vector<C> individuals;
  for (std::size_t i = 0; i < size; ++i) {
    C c = factory(rng);
    c.id = pop.next_genome_id++;
    individuals.push_back(std::move(c));
  }
  pop.species = speciate(std::move(individuals), {}, config.threshold, config.coefficients,
                         pop.next_species_id);
  return pop;
}

namespace {

double fitness_of(const FitnessMap& fitness, GenomeId id) {
  auto it = fitness.find(id);
  if (it == fitness.end())
    throw std::invalid_argument("no fitness recorded for chromosome " + std::to_string(id));
  if (!std::isfinite(it->second))
    throw std::invalid_argument("non-finite fitness for chromosome " + std::to_string(id));
  return it->second;
}

template <class C>
std::vector<const C*> ranked(const Species<C>& s, const FitnessMap& fitness) {
  std::vector<const C*> out;
  for (const auto& m : s.members) out.push_back(&m);
  std::sort(out.begin(), out.end(), [&](const C* a, const C* b) {
    const double fa = fitness.at(a->id), fb = fitness.at(b->id);
    if (fa != fb) return fa > fb;
    return a->id < b->id;
  });
  return out;
}

}  // namespace

template <class C>
Population<C> reproduce(const Population<C>& population, const FitnessMap& fitness,
                        const ReproductionConfig& config, const Mutator<C>& mutate,
                        InnovationRegistry& registry, Rng& rng) {
  const C* global_best = nullptr;
  double global_best_fitness = 0.0;
  for (const auto* m : population.members()) {
    const double f = fitness_of(fitness, m->id);
    if (global_best == nullptr || f > global_best_fitness ||
        (f == global_best_fitness && m->id < global_best->id)) {
      global_best = m;
      global_best_fitness = f;
    }
  }
  if (global_best == nullptr) throw std::invalid_argument("cannot reproduce an empty population");
  registry.new_generation();

  std::vector<Species<C>> updated = population.species;
  std::vector<SpeciesShare> shares;
  for (auto& s : updated) {
    double best = fitness.at(s.members.front().id), sum = 0.0;
    bool holds_best = false;
    for (const auto& m : s.members) {
      const double f = fitness.at(m.id);
      best = std::max(best, f);
      sum += f;
      holds_best = holds_best || m.id == global_best->id;
    }
    if (!s.best_fitness || best > *s.best_fitness) {
      s.best_fitness = best;
      s.staleness = 0;
    } else {
      ++s.staleness;
    }
    const bool stale = s.staleness >= config.stale_limit;
    shares.push_back({s.id, sum / static_cast<double>(s.members.size()), !stale || holds_best});
  }
  const auto allocation = allocate_offspring(shares, config.population_size);

  Population<C> next;
  next.generation = population.generation + 1;
  next.next_genome_id = population.next_genome_id;
  next.next_species_id = population.next_species_id;

  std::vector<C> offspring;
  std::vector<Species<C>> surviving;
  for (const auto& s : updated) {
    const std::size_t count = allocation.at(s.id);
    if (count == 0) continue;
    surviving.push_back(s);
    const auto order = ranked(s, fitness);
    const std::size_t elites = std::min({config.elitism, count, order.size()});
    for (std::size_t i = 0; i < elites; ++i) offspring.push_back(*order[i]);

    const auto keep = static_cast<std::size_t>(
        std::ceil(static_cast<double>(order.size()) * (1.0 - config.survival_fraction)));
    const std::size_t pool = std::clamp<std::size_t>(keep, 1, order.size());
    for (std::size_t i = elites; i < count; ++i) {
      C child;
      if (pool >= 2 && rng.bernoulli(config.crossover_rate)) {
        const std::size_t a = rng.index(pool);
        std::size_t b = rng.index(pool - 1);
        if (b >= a) ++b;
        child = crossover(*order[a], *order[b], fitness.at(order[a]->id),
                          fitness.at(order[b]->id), rng);
      } else {
        child = *order[rng.index(pool)];
      }
      child = mutate(std::move(child), rng);
      child.id = next.next_genome_id++;
      offspring.push_back(std::move(child));
    }
  }
  next.species = speciate(std::move(offspring), surviving, config.threshold, config.coefficients,
                          next.next_species_id);
  return next;
}

template <class C>
GenerationStats summarize(const Population<C>& population, const FitnessMap& fitness) {
  GenerationStats stats;
  stats.generation = population.generation;
  stats.species_count = population.species.size();
  double sum = 0.0;
  bool first = true;
  const auto members = population.members();
  for (const auto* m : members) {
    const double f = fitness_of(fitness, m->id);
    sum += f;
    if (first || f > stats.best_fitness || (f == stats.best_fitness && m->id < stats.best_id)) {
      stats.best_fitness = f;
      stats.best_id = m->id;
      first = false;
    }
  }
  stats.mean_fitness = members.empty() ? 0.0 : sum / static_cast<double>(members.size());
  return stats;
}

template <class C>
DeepNeatStep<C> deepneat_generation(
    const Population<C>& population,
    const std::function<std::vector<double>(const std::vector<const C*>&)>& evaluate,
    const ReproductionConfig& config, const Mutator<C>& mutate, InnovationRegistry& registry,
    Rng& rng) {
  const auto members = population.members();
  const auto scores = evaluate(members);
  if (scores.size() != members.size())
    throw std::runtime_error("evaluator returned the wrong number of scores");
  DeepNeatStep<C> step;
  for (std::size_t i = 0; i < members.size(); ++i) step.fitness[members[i]->id] = scores[i];
  step.stats = summarize(population, step.fitness);
  step.next = reproduce(population, step.fitness, config, mutate, registry, rng);
  return step;
}

namespace {

template <class C>
json population_json(const Population<C>& pop) {
  json species = json::array();
  for (const auto& s : pop.species) {
    json members = json::array();
    for (const auto& m : s.members) members.push_back(to_json(m));
    species.push_back({{"id", s.id},
                       {"representative", to_json(s.representative)},
                       {"members", members},
                       {"staleness", s.staleness},
                       {"best_fitness", s.best_fitness ? json(*s.best_fitness) : json(nullptr)}});
  }
  return {{"generation", pop.generation},
          {"next_genome_id", pop.next_genome_id},
          {"next_species_id", pop.next_species_id},
          {"species", species}};
}

template <class C, class Load>
Population<C> population_from(const json& j, Load load) {
  Population<C> pop;
  pop.generation = j.at("generation").get<int>();
  pop.next_genome_id = j.at("next_genome_id").get<GenomeId>();
  pop.next_species_id = j.at("next_species_id").get<SpeciesId>();
  for (const auto& sj : j.at("species")) {
    Species<C> s;
    s.id = sj.at("id").get<SpeciesId>();
    s.representative = load(sj.at("representative"));
    for (const auto& m : sj.at("members")) s.members.push_back(load(m));
    s.staleness = sj.at("staleness").get<int>();
    if (!sj.at("best_fitness").is_null()) s.best_fitness = sj.at("best_fitness").get<double>();
    pop.species.push_back(std::move(s));
  }
  return pop;
}

}  // namespace

json to_json(const Population<ModuleChromosome>& population) { return population_json(population); }
json to_json(const Population<BlueprintChromosome>& population) {
  return population_json(population);
}

Population<ModuleChromosome> module_population_from_json(const json& j,
                                                         const HyperparameterSpace& space) {
  return population_from<ModuleChromosome>(j, [&](const json& c) { return module_from_json(c, space); });
}

Population<BlueprintChromosome> blueprint_population_from_json(const json& j,
                                                               const HyperparameterSpace& space) {
  return population_from<BlueprintChromosome>(
      j, [&](const json& c) { return blueprint_from_json(c, space); });
}

#define CODEEPNEAT_INSTANTIATE(C)                                                              \
  template struct Population<C>;                                                               \
  template std::vector<Species<C>> speciate(std::vector<C>, const std::vector<Species<C>>&,    \
                                            double, const CompatibilityCoefficients&,          \
                                            SpeciesId&);                                       \
  template Population<C> initialize_population(std::size_t, const std::function<C(Rng&)>&,     \
                                               const ReproductionConfig&, Rng&);               \
  template Population<C> reproduce(const Population<C>&, const FitnessMap&,                    \
                                   const ReproductionConfig&, const Mutator<C>&,               \
                                   InnovationRegistry&, Rng&);                                 \
  template GenerationStats summarize(const Population<C>&, const FitnessMap&);                 \
  template DeepNeatStep<C> deepneat_generation(                                                \
      const Population<C>&,                                                                    \
      const std::function<std::vector<double>(const std::vector<const C*>&)>&,                 \
      const ReproductionConfig&, const Mutator<C>&, InnovationRegistry&, Rng&);

CODEEPNEAT_INSTANTIATE(ModuleChromosome)
CODEEPNEAT_INSTANTIATE(BlueprintChromosome)

#undef CODEEPNEAT_INSTANTIATE

}  // namespace codeepneat
