#include "codeepneat/genome.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>

namespace codeepneat {

std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::input: return "input";
    case NodeRole::output: return "output";
    case NodeRole::hidden: return "hidden";
  }
  return "hidden";
}

std::string_view to_string(LinkKind kind) {
  return kind == LinkKind::layer ? "layer" : "cell_skip";
}

namespace {

NodeRole role_from_string(std::string_view s) {
  if (s == "input") return NodeRole::input;
  if (s == "output") return NodeRole::output;
  if (s == "hidden") return NodeRole::hidden;
  throw std::invalid_argument("unknown node role '" + std::string(s) + "'");
}

LinkKind link_from_string(std::string_view s) {
  if (s == "layer") return LinkKind::layer;
  if (s == "cell_skip") return LinkKind::cell_skip;
  throw std::invalid_argument("unknown link kind '" + std::string(s) + "'");
}

template <class T>
auto lower_bound_id(std::vector<T>& v, InnovationId id) {
  return std::lower_bound(v.begin(), v.end(), id,
                          [](const T& x, InnovationId key) { return x.innovation < key; });
}

template <class T>
const T* find_in(const std::vector<T>& v, InnovationId id) {
  auto it = std::lower_bound(v.begin(), v.end(), id,
                             [](const T& x, InnovationId key) { return x.innovation < key; });
  return it != v.end() && it->innovation == id ? &*it : nullptr;
}

template <class T>
T* find_in(std::vector<T>& v, InnovationId id) {
  auto it = lower_bound_id(v, id);
  return it != v.end() && it->innovation == id ? &*it : nullptr;
}

template <class T>
void sort_genes(std::vector<T>& v) {
  std::sort(v.begin(), v.end(),
            [](const T& a, const T& b) { return a.innovation < b.innovation; });
}

template <class C>
void canonicalize(C& c) {
  sort_genes(c.nodes);
  sort_genes(c.edges);
}

template <class C>
bool has_gene(const C& c, InnovationId id) {
  return find_in(c.nodes, id) != nullptr || find_in(c.edges, id) != nullptr;
}

using Adjacency = std::map<InnovationId, std::vector<InnovationId>>;

template <class C>
Adjacency layer_adjacency(const C& c, bool forward) {
  Adjacency adj;
  for (const auto& e : c.edges) {
    if (!e.enabled || e.kind != LinkKind::layer) continue;
    if (forward)
      adj[e.from].push_back(e.to);
    else
      adj[e.to].push_back(e.from);
  }
  return adj;
}

std::set<InnovationId> reach(const Adjacency& adj, InnovationId start) {
  std::set<InnovationId> seen{start};
  std::vector<InnovationId> stack{start};
  while (!stack.empty()) {
    const auto n = stack.back();
    stack.pop_back();
    auto it = adj.find(n);
    if (it == adj.end()) continue;
    for (auto m : it->second)
      if (seen.insert(m).second) stack.push_back(m);
  }
  return seen;
}

template <class C>
std::set<InnovationId> on_path(const C& c) {
  const auto fwd = reach(layer_adjacency(c, true), kInputNodeId);
  const auto bwd = reach(layer_adjacency(c, false), kOutputNodeId);
  std::set<InnovationId> both;
  std::set_intersection(fwd.begin(), fwd.end(), bwd.begin(), bwd.end(),
                        std::inserter(both, both.end()));
  return both;
}

template <class C>
bool has_path(const C& c) {
  return reach(layer_adjacency(c, true), kInputNodeId).count(kOutputNodeId) > 0;
}

// Adding from->to closes a cycle iff from is reachable from to.
template <class C>
bool would_cycle(const C& c, InnovationId from, InnovationId to) {
  if (from == to) return true;
  return reach(layer_adjacency(c, true), to).count(from) > 0;
}

template <class C>
bool has_layer_edge(const C& c, InnovationId from, InnovationId to, bool enabled_only) {
  for (const auto& e : c.edges)
    if (e.kind == LinkKind::layer && e.from == from && e.to == to && (e.enabled || !enabled_only))
      return true;
  return false;
}

template <class C>
void refresh_activity(C& c) {
  const auto active = on_path(c);
  for (auto& n : c.nodes)
    if (n.role == NodeRole::hidden) n.enabled = active.count(n.innovation) > 0;
}

bool is_lstm(const LayerGene& n) { return n.role == NodeRole::hidden && n.layer_kind == kLstmKind; }

// cell_skip genes must join two existing lstm nodes, one gene per ordered pair.
void sanitize_skips(ModuleChromosome& c) {
  std::set<std::pair<InnovationId, InnovationId>> seen;
  std::erase_if(c.edges, [&](const ConnectionGene& e) {
    if (e.kind != LinkKind::cell_skip) return false;
    const auto* a = find_in(c.nodes, e.from);
    const auto* b = find_in(c.nodes, e.to);
    if (a == nullptr || b == nullptr || e.from == e.to || !is_lstm(*a) || !is_lstm(*b)) return true;
    return !seen.insert({e.from, e.to}).second;
  });
}

void sanitize_skips(BlueprintChromosome&) {}

template <class C>
std::vector<InnovationId> active_hidden(const C& c) {
  std::vector<InnovationId> out;
  for (const auto& n : c.nodes)
    if (n.role == NodeRole::hidden && n.enabled) out.push_back(n.innovation);
  return out;
}

template <class C, class MakeNode>
Mutation<C> split_impl(const C& c, InnovationId edge_id, InnovationRegistry& registry,
                       MakeNode make_node) {
  const auto* e = find_in(c.edges, edge_id);
  if (e == nullptr || !e->enabled || e->kind != LinkKind::layer) return {c, false};
  C out = c;
  auto ids = registry.split(edge_id);
  if (has_gene(out, ids.node) || has_gene(out, ids.in_edge) || has_gene(out, ids.out_edge))
    ids = {registry.fresh(), registry.fresh(), registry.fresh()};
  find_in(out.edges, edge_id)->enabled = false;
  out.nodes.push_back(make_node(ids.node));
  out.edges.push_back({ids.in_edge, e->from, ids.node, true, LinkKind::layer});
  out.edges.push_back({ids.out_edge, ids.node, e->to, true, LinkKind::layer});
  canonicalize(out);
  refresh_activity(out);
  return {std::move(out), true};
}

template <class C>
std::vector<InnovationId> enabled_layer_edges(const C& c) {
  std::vector<InnovationId> out;
  for (const auto& e : c.edges)
    if (e.enabled && e.kind == LinkKind::layer) out.push_back(e.innovation);
  return out;
}

template <class C>
bool can_add_edge(const C& c, InnovationId from, InnovationId to) {
  const auto* a = find_in(c.nodes, from);
  const auto* b = find_in(c.nodes, to);
  if (a == nullptr || b == nullptr || from == to) return false;
  if (!a->enabled || !b->enabled) return false;
  if (a->role == NodeRole::output || b->role == NodeRole::input) return false;
  if (has_layer_edge(c, from, to, false)) return false;
  return !would_cycle(c, from, to);
}

template <class C>
Mutation<C> add_edge_impl(const C& c, InnovationId from, InnovationId to,
                          InnovationRegistry& registry) {
  if (!can_add_edge(c, from, to)) return {c, false};
  C out = c;
  auto id = registry.edge(from, to, LinkKind::layer);
  if (has_gene(out, id)) id = registry.fresh();
  out.edges.push_back({id, from, to, true, LinkKind::layer});
  canonicalize(out);
  refresh_activity(out);
  return {std::move(out), true};
}

template <class C>
Mutation<C> mutate_add_edge_impl(const C& c, InnovationRegistry& registry, Rng& rng) {
  std::vector<InnovationId> sources, targets;
  std::size_t active = 0;
  for (const auto& n : c.nodes) {
    if (!n.enabled) continue;
    ++active;
    if (n.role != NodeRole::output) sources.push_back(n.innovation);
    if (n.role != NodeRole::input) targets.push_back(n.innovation);
  }
  if (sources.empty() || targets.empty()) return {c, false};
  const std::size_t tries = active * active;
  for (std::size_t t = 0; t < tries; ++t) {
    const auto from = sources[rng.index(sources.size())];
    const auto to = targets[rng.index(targets.size())];
    if (can_add_edge(c, from, to)) return add_edge_impl(c, from, to, registry);
  }
  return {c, false};
}

template <class C>
Mutation<C> toggle_impl(const C& c, InnovationId edge_id) {
  const auto* e = find_in(c.edges, edge_id);
  if (e == nullptr || e->kind != LinkKind::layer) return {c, false};
  C out = c;
  auto* g = find_in(out.edges, edge_id);
  if (g->enabled) {
    g->enabled = false;
    if (!has_path(out)) return {c, false};
  } else {
    if (find_in(c.nodes, e->from) == nullptr || find_in(c.nodes, e->to) == nullptr) return {c, false};
    if (has_layer_edge(c, e->from, e->to, true) || would_cycle(c, e->from, e->to)) return {c, false};
    g->enabled = true;
  }
  refresh_activity(out);
  return {std::move(out), true};
}

template <class C>
Mutation<C> toggle_random_impl(const C& c, Rng& rng) {
  std::vector<InnovationId> candidates;
  for (const auto& e : c.edges)
    if (e.kind == LinkKind::layer) candidates.push_back(e.innovation);
  if (candidates.empty())
    throw std::invalid_argument("toggle_layer_connection: chromosome has no layer edges");
  for (std::size_t i = candidates.size(); i > 1; --i)
    std::swap(candidates[i - 1], candidates[rng.index(i)]);
  for (auto id : candidates) {
    auto result = toggle_impl(c, id);
    if (result.applied) return result;
  }
  return {c, false};
}

template <class C>
std::vector<InnovationId> gene_ids(const C& c) {
  std::vector<InnovationId> ids;
  ids.reserve(c.nodes.size() + c.edges.size());
  for (const auto& n : c.nodes) ids.push_back(n.innovation);
  for (const auto& e : c.edges) ids.push_back(e.innovation);
  std::sort(ids.begin(), ids.end());
  return ids;
}

template <class C>
GeneAlignment align_impl(const C& a, const C& b) {
  const auto ia = gene_ids(a);
  const auto ib = gene_ids(b);
  GeneAlignment out;
  const auto excess_over = [](const std::vector<InnovationId>& other, InnovationId id) {
    return other.empty() || id > other.back();
  };
  std::size_t i = 0, j = 0;
  while (i < ia.size() || j < ib.size()) {
    if (j == ib.size() || (i < ia.size() && ia[i] < ib[j])) {
      (excess_over(ib, ia[i]) ? out.excess_a : out.disjoint_a).push_back(ia[i]);
      ++i;
    } else if (i == ia.size() || ib[j] < ia[i]) {
      (excess_over(ia, ib[j]) ? out.excess_b : out.disjoint_b).push_back(ib[j]);
      ++j;
    } else {
      out.matched.push_back(ia[i]);
      ++i;
      ++j;
    }
  }
  return out;
}

// Restores graph invariants on a recombined child: drops duplicate or
// cycle-closing enabled edges (lowest innovation wins), guarantees an
// input->output path, removes genes that no edge references, and resyncs the
// node activity flags.
template <class C>
void repair(C& child, const C& fitter) {
  canonicalize(child);
  std::vector<char> wanted(child.edges.size());
  for (std::size_t i = 0; i < child.edges.size(); ++i) {
    auto& e = child.edges[i];
    if (e.kind != LinkKind::layer) continue;
    wanted[i] = e.enabled;
    e.enabled = false;
  }
  for (std::size_t i = 0; i < child.edges.size(); ++i) {
    auto& e = child.edges[i];
    if (e.kind != LinkKind::layer || !wanted[i]) continue;
    if (!has_layer_edge(child, e.from, e.to, true) && !would_cycle(child, e.from, e.to))
      e.enabled = true;
  }
  if (!has_path(child)) {
    for (const auto& fe : fitter.edges) {
      if (!fe.enabled || fe.kind != LinkKind::layer) continue;
      auto* ce = find_in(child.edges, fe.innovation);
      if (ce == nullptr || ce->enabled) continue;
      if (!has_layer_edge(child, ce->from, ce->to, true) && !would_cycle(child, ce->from, ce->to))
        ce->enabled = true;
    }
  }
  if (!has_path(child)) {
    const auto globals = child.globals;
    child = fitter;
    child.globals = globals;
    return;
  }
  std::set<InnovationId> referenced;
  for (const auto& e : child.edges) {
    referenced.insert(e.from);
    referenced.insert(e.to);
  }
  std::erase_if(child.nodes, [&](const auto& n) {
    return n.role == NodeRole::hidden && referenced.count(n.innovation) == 0;
  });
  sanitize_skips(child);
  refresh_activity(child);
}

template <class C, class CombineNodes>
C crossover_impl(const C& a, const C& b, double fitness_a, double fitness_b, Rng& rng,
                 CombineNodes combine) {
  const bool a_fitter = fitness_a >= fitness_b;
  const C& fitter = a_fitter ? a : b;
  const C& other = a_fitter ? b : a;

  C child;
  child.globals = crossover_tables(a.globals, b.globals, rng);
  for (const auto& n : fitter.nodes) {
    if (find_in(other.nodes, n.innovation) != nullptr)
      child.nodes.push_back(
          combine(*find_in(a.nodes, n.innovation), *find_in(b.nodes, n.innovation), rng));
    else
      child.nodes.push_back(n);
  }
  for (const auto& e : fitter.edges) {
    const auto* oe = find_in(other.edges, e.innovation);
    if (oe == nullptr) {
      child.edges.push_back(e);
      continue;
    }
    const auto& ea = *find_in(a.edges, e.innovation);
    const auto& eb = *find_in(b.edges, e.innovation);
    ConnectionGene g = rng.bernoulli(0.5) ? eb : ea;
    if (!ea.enabled && !eb.enabled)
      g.enabled = false;
    else if (!ea.enabled || !eb.enabled)
      g.enabled = !rng.bernoulli(0.75);
    else
      g.enabled = true;
    child.edges.push_back(g);
  }
  repair(child, fitter);
  child.id = 0;
  return child;
}

template <class C, class NodeDistance>
double distance_impl(const C& a, const C& b, const CompatibilityCoefficients& k,
                     NodeDistance node_distance) {
  const auto al = align_impl(a, b);
  const double n = static_cast<double>(
      std::max({a.nodes.size() + a.edges.size(), b.nodes.size() + b.edges.size(), std::size_t{1}}));
  const double excess = static_cast<double>(al.excess_a.size() + al.excess_b.size());
  const double disjoint = static_cast<double>(al.disjoint_a.size() + al.disjoint_b.size());
  double param_sum = 0.0;
  std::size_t param_count = 0;
  for (auto id : al.matched) {
    const auto* na = find_in(a.nodes, id);
    const auto* nb = find_in(b.nodes, id);
    if (na == nullptr || nb == nullptr || na->role != NodeRole::hidden) continue;
    param_sum += node_distance(*na, *nb);
    ++param_count;
  }
  const double w = param_count > 0 ? param_sum / static_cast<double>(param_count) : 0.0;
  return k.excess * excess / n + k.disjoint * disjoint / n + k.params * w;
}

template <class C>
std::vector<std::string> check_graph(const C& c) {
  std::vector<std::string> v;
  const auto sorted_unique = [](const auto& genes) {
    for (std::size_t i = 1; i < genes.size(); ++i)
      if (!(genes[i - 1].innovation < genes[i].innovation)) return false;
    return true;
  };
  if (!sorted_unique(c.nodes)) v.push_back("node genes not sorted/unique by innovation");
  if (!sorted_unique(c.edges)) v.push_back("edge genes not sorted/unique by innovation");
  for (const auto& e : c.edges)
    if (find_in(c.nodes, e.innovation) != nullptr)
      v.push_back("innovation " + std::to_string(e.innovation) + " used by a node and an edge");

  std::size_t inputs = 0, outputs = 0;
  for (const auto& n : c.nodes) {
    if (n.role == NodeRole::input) {
      ++inputs;
      if (n.innovation != kInputNodeId) v.push_back("input node has unexpected id");
      if (!n.enabled) v.push_back("input node disabled");
    }
    if (n.role == NodeRole::output) {
      ++outputs;
      if (n.innovation != kOutputNodeId) v.push_back("output node has unexpected id");
      if (!n.enabled) v.push_back("output node disabled");
    }
  }
  if (inputs != 1) v.push_back("expected exactly one input node");
  if (outputs != 1) v.push_back("expected exactly one output node");

  std::set<std::tuple<InnovationId, InnovationId, int>> enabled_pairs;
  for (const auto& e : c.edges) {
    const auto* a = find_in(c.nodes, e.from);
    const auto* b = find_in(c.nodes, e.to);
    const auto tag = "edge " + std::to_string(e.innovation);
    if (a == nullptr || b == nullptr) {
      v.push_back(tag + " has a missing endpoint");
      continue;
    }
    if (e.from == e.to) v.push_back(tag + " is a self-loop");
    if (e.kind == LinkKind::layer && (a->role == NodeRole::output || b->role == NodeRole::input))
      v.push_back(tag + " leaves the output or enters the input");
    if (e.enabled && !enabled_pairs.insert({e.from, e.to, static_cast<int>(e.kind)}).second)
      v.push_back(tag + " duplicates an enabled connection");
  }

  // Kahn's algorithm over enabled layer edges.
  std::map<InnovationId, int> indegree;
  for (const auto& n : c.nodes) indegree[n.innovation] = 0;
  const auto adj = layer_adjacency(c, true);
  for (const auto& [from, tos] : adj)
    for (auto to : tos)
      if (indegree.count(to)) ++indegree[to];
  std::deque<InnovationId> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.push_back(id);
  std::size_t visited = 0;
  while (!ready.empty()) {
    const auto n = ready.front();
    ready.pop_front();
    ++visited;
    auto it = adj.find(n);
    if (it == adj.end()) continue;
    for (auto m : it->second)
      if (indegree.count(m) && --indegree[m] == 0) ready.push_back(m);
  }
  if (visited != indegree.size()) v.push_back("enabled layer edges contain a cycle");

  if (!has_path(c)) v.push_back("no input->output path");
  const auto active = on_path(c);
  for (const auto& n : c.nodes)
    if (n.role == NodeRole::hidden && n.enabled != (active.count(n.innovation) > 0))
      v.push_back("node " + std::to_string(n.innovation) + " activity flag out of sync");
  return v;
}

template <class C>
json edges_to_json(const C& c) {
  json edges = json::array();
  for (const auto& e : c.edges)
    edges.push_back({{"id", e.innovation},
                     {"from", e.from},
                     {"to", e.to},
                     {"enabled", e.enabled},
                     {"link", std::string(to_string(e.kind))}});
  return edges;
}

std::vector<ConnectionGene> edges_from_json(const json& j) {
  std::vector<ConnectionGene> out;
  for (const auto& e : j)
    out.push_back({e.at("id").get<InnovationId>(), e.at("from").get<InnovationId>(),
                   e.at("to").get<InnovationId>(), e.at("enabled").get<bool>(),
                   link_from_string(e.at("link").get<std::string>())});
  return out;
}

}  // namespace

// --- registry ---------------------------------------------------------------

InnovationRegistry::InnovationRegistry(const InnovationRegistry& other) {
  std::lock_guard lock(other.mutex_);
  next_ = other.next_;
  edges_ = other.edges_;
  splits_ = other.splits_;
}

InnovationRegistry& InnovationRegistry::operator=(const InnovationRegistry& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  next_ = other.next_;
  edges_ = other.edges_;
  splits_ = other.splits_;
  return *this;
}

InnovationId InnovationRegistry::edge(InnovationId from, InnovationId to, LinkKind kind) {
  std::lock_guard lock(mutex_);
  const auto key = std::make_tuple(from, to, static_cast<int>(kind));
  auto it = edges_.find(key);
  if (it != edges_.end()) return it->second;
  const auto id = next_++;
  edges_.emplace(key, id);
  return id;
}

InnovationRegistry::Split InnovationRegistry::split(InnovationId edge) {
  std::lock_guard lock(mutex_);
  auto it = splits_.find(edge);
  if (it != splits_.end()) return it->second;
  Split s{next_, next_ + 1, next_ + 2};
  next_ += 3;
  splits_.emplace(edge, s);
  return s;
}

InnovationId InnovationRegistry::fresh() {
  std::lock_guard lock(mutex_);
  return next_++;
}

void InnovationRegistry::new_generation() {
  std::lock_guard lock(mutex_);
  edges_.clear();
  splits_.clear();
}

InnovationId InnovationRegistry::peek_next() const {
  std::lock_guard lock(mutex_);
  return next_;
}

json InnovationRegistry::to_json() const {
  std::lock_guard lock(mutex_);
  json edges = json::array(), splits = json::array();
  for (const auto& [key, id] : edges_)
    edges.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), id});
  for (const auto& [edge, s] : splits_) splits.push_back({edge, s.node, s.in_edge, s.out_edge});
  return {{"next", next_}, {"edges", edges}, {"splits", splits}};
}

InnovationRegistry InnovationRegistry::from_json(const json& j) {
  InnovationRegistry r(j.at("next").get<InnovationId>());
  for (const auto& e : j.value("edges", json::array()))
    r.edges_.emplace(std::make_tuple(e[0].get<InnovationId>(), e[1].get<InnovationId>(),
                                     e[2].get<int>()),
                     e[3].get<InnovationId>());
  for (const auto& s : j.value("splits", json::array()))
    r.splits_.emplace(s[0].get<InnovationId>(),
                      Split{s[1].get<InnovationId>(), s[2].get<InnovationId>(),
                            s[3].get<InnovationId>()});
  return r;
}

// --- accessors ----------------------------------------------------------------

const LayerGene* ModuleChromosome::node(InnovationId innovation) const {
  return find_in(nodes, innovation);
}
const ConnectionGene* ModuleChromosome::edge(InnovationId innovation) const {
  return find_in(edges, innovation);
}
const BlueprintNode* BlueprintChromosome::node(InnovationId innovation) const {
  return find_in(nodes, innovation);
}
const ConnectionGene* BlueprintChromosome::edge(InnovationId innovation) const {
  return find_in(edges, innovation);
}

// --- construction -----------------------------------------------------------

namespace {

LayerGene io_layer(InnovationId id, NodeRole role) {
  return {id, role, std::string(to_string(role)), HyperparameterTable(), true};
}

LayerGene hidden_layer(InnovationId id, const HyperparameterSpace& space, Rng& rng) {
  auto params = sample_table(space.node, rng);
  auto kind = layer_kind_of(params);
  return {id, NodeRole::hidden, std::move(kind), std::move(params), true};
}

SpeciesId pick_species(std::span<const SpeciesId> live, Rng& rng) {
  if (live.empty()) throw std::invalid_argument("no live module species to point at");
  return live[rng.index(live.size())];
}

}  // namespace

ModuleChromosome minimal_chromosome(const HyperparameterSpace& space, Rng& rng) {
  ModuleChromosome c;
  c.nodes.push_back(io_layer(kInputNodeId, NodeRole::input));
  c.nodes.push_back(io_layer(kOutputNodeId, NodeRole::output));
  c.nodes.push_back(hidden_layer(kSeedHiddenId, space, rng));
  c.edges.push_back({kSeedInEdgeId, kInputNodeId, kSeedHiddenId, true, LinkKind::layer});
  c.edges.push_back({kSeedOutEdgeId, kSeedHiddenId, kOutputNodeId, true, LinkKind::layer});
  c.globals = sample_table(space.global, rng);
  return c;
}

BlueprintChromosome minimal_blueprint(const HyperparameterSpace& space,
                                      std::span<const SpeciesId> live_species, Rng& rng) {
  BlueprintChromosome c;
  c.nodes.push_back({kInputNodeId, NodeRole::input, kNoSpecies, true});
  c.nodes.push_back({kOutputNodeId, NodeRole::output, kNoSpecies, true});
  c.nodes.push_back({kSeedHiddenId, NodeRole::hidden, pick_species(live_species, rng), true});
  c.edges.push_back({kSeedInEdgeId, kInputNodeId, kSeedHiddenId, true, LinkKind::layer});
  c.edges.push_back({kSeedOutEdgeId, kSeedHiddenId, kOutputNodeId, true, LinkKind::layer});
  c.globals = sample_table(space.global, rng);
  return c;
}

// --- structural mutation ----------------------------------------------------

Mutation<ModuleChromosome> split_edge(const ModuleChromosome& c, InnovationId edge,
                                      const HyperparameterSpace& space,
                                      InnovationRegistry& registry, Rng& rng) {
  return split_impl(c, edge, registry,
                    [&](InnovationId id) { return hidden_layer(id, space, rng); });
}

Mutation<BlueprintChromosome> split_edge(const BlueprintChromosome& c, InnovationId edge,
                                         SpeciesId species, InnovationRegistry& registry) {
  return split_impl(c, edge, registry, [&](InnovationId id) {
    return BlueprintNode{id, NodeRole::hidden, species, true};
  });
}

Mutation<ModuleChromosome> mutate_add_node(const ModuleChromosome& c,
                                           const HyperparameterSpace& space,
                                           InnovationRegistry& registry, Rng& rng) {
  const auto candidates = enabled_layer_edges(c);
  if (candidates.empty()) return {c, false};
  return split_edge(c, candidates[rng.index(candidates.size())], space, registry, rng);
}

Mutation<BlueprintChromosome> mutate_add_node(const BlueprintChromosome& c,
                                              std::span<const SpeciesId> live_species,
                                              InnovationRegistry& registry, Rng& rng) {
  const auto candidates = enabled_layer_edges(c);
  if (candidates.empty()) return {c, false};
  const auto edge = candidates[rng.index(candidates.size())];
  return split_edge(c, edge, pick_species(live_species, rng), registry);
}

Mutation<ModuleChromosome> mutate_add_edge(const ModuleChromosome& c,
                                           InnovationRegistry& registry, Rng& rng) {
  return mutate_add_edge_impl(c, registry, rng);
}
Mutation<BlueprintChromosome> mutate_add_edge(const BlueprintChromosome& c,
                                              InnovationRegistry& registry, Rng& rng) {
  return mutate_add_edge_impl(c, registry, rng);
}
Mutation<ModuleChromosome> add_edge(const ModuleChromosome& c, InnovationId from,
                                    InnovationId to, InnovationRegistry& registry) {
  return add_edge_impl(c, from, to, registry);
}
Mutation<BlueprintChromosome> add_edge(const BlueprintChromosome& c, InnovationId from,
                                       InnovationId to, InnovationRegistry& registry) {
  return add_edge_impl(c, from, to, registry);
}

Mutation<ModuleChromosome> toggle_layer_connection(const ModuleChromosome& c, Rng& rng) {
  return toggle_random_impl(c, rng);
}
Mutation<BlueprintChromosome> toggle_layer_connection(const BlueprintChromosome& c, Rng& rng) {
  return toggle_random_impl(c, rng);
}
Mutation<ModuleChromosome> toggle_edge(const ModuleChromosome& c, InnovationId edge) {
  return toggle_impl(c, edge);
}
Mutation<BlueprintChromosome> toggle_edge(const BlueprintChromosome& c, InnovationId edge) {
  return toggle_impl(c, edge);
}

std::size_t count_active_lstm(const ModuleChromosome& c) {
  return static_cast<std::size_t>(std::count_if(c.nodes.begin(), c.nodes.end(), [](const auto& n) {
    return is_lstm(n) && n.enabled;
  }));
}

Mutation<ModuleChromosome> add_skip(const ModuleChromosome& c, InnovationId from,
                                    InnovationId to, InnovationRegistry& registry) {
  const auto* a = c.node(from);
  const auto* b = c.node(to);
  if (a == nullptr || b == nullptr || from == to) return {c, false};
  if (!is_lstm(*a) || !is_lstm(*b) || !a->enabled || !b->enabled) return {c, false};
  for (const auto& e : c.edges)
    if (e.kind == LinkKind::cell_skip && e.from == from && e.to == to) return {c, false};
  ModuleChromosome out = c;
  auto id = registry.edge(from, to, LinkKind::cell_skip);
  if (has_gene(out, id)) id = registry.fresh();
  out.edges.push_back({id, from, to, true, LinkKind::cell_skip});
  canonicalize(out);
  return {std::move(out), true};
}

Mutation<ModuleChromosome> remove_skip(const ModuleChromosome& c, InnovationId edge) {
  const auto* e = c.edge(edge);
  if (e == nullptr || e->kind != LinkKind::cell_skip) return {c, false};
  ModuleChromosome out = c;
  std::erase_if(out.edges, [&](const ConnectionGene& g) { return g.innovation == edge; });
  return {std::move(out), true};
}

Mutation<ModuleChromosome> mutate_skip_connection(const ModuleChromosome& c,
                                                  InnovationRegistry& registry, Rng& rng,
                                                  std::optional<bool> force_add) {
  std::vector<InnovationId> lstm;
  for (const auto& n : c.nodes)
    if (is_lstm(n) && n.enabled) lstm.push_back(n.innovation);
  if (lstm.size() < 2)
    throw std::invalid_argument("mutate_skip_connection: needs at least two lstm nodes");
  const bool add = force_add ? *force_add : rng.bernoulli(0.5);
  if (add) {
    std::vector<std::pair<InnovationId, InnovationId>> pairs;
    for (auto from : lstm)
      for (auto to : lstm) {
        if (from == to) continue;
        const bool taken = std::any_of(c.edges.begin(), c.edges.end(), [&](const auto& e) {
          return e.kind == LinkKind::cell_skip && e.from == from && e.to == to;
        });
        if (!taken) pairs.emplace_back(from, to);
      }
    if (pairs.empty()) return {c, false};
    const auto [from, to] = pairs[rng.index(pairs.size())];
    return add_skip(c, from, to, registry);
  }
  std::vector<InnovationId> skips;
  for (const auto& e : c.edges)
    if (e.kind == LinkKind::cell_skip) skips.push_back(e.innovation);
  if (skips.empty()) return {c, false};
  return remove_skip(c, skips[rng.index(skips.size())]);
}

ModuleChromosome mutate_parameters(const ModuleChromosome& c, double table_rate,
                                   double per_param_rate, Rng& rng) {
  ModuleChromosome out = c;
  for (auto& n : out.nodes) {
    if (n.role != NodeRole::hidden || !rng.bernoulli(table_rate)) continue;
    n.params = mutate_table(n.params, per_param_rate, rng);
    n.layer_kind = layer_kind_of(n.params);
  }
  if (rng.bernoulli(table_rate)) out.globals = mutate_table(out.globals, per_param_rate, rng);
  sanitize_skips(out);
  return out;
}

BlueprintChromosome mutate_globals(const BlueprintChromosome& c, double table_rate,
                                   double per_param_rate, Rng& rng) {
  BlueprintChromosome out = c;
  if (rng.bernoulli(table_rate)) out.globals = mutate_table(out.globals, per_param_rate, rng);
  return out;
}

BlueprintChromosome mutate_species_pointers(const BlueprintChromosome& c,
                                            std::span<const SpeciesId> live_species, double rate,
                                            Rng& rng) {
  BlueprintChromosome out = c;
  if (live_species.empty()) return out;
  for (auto& n : out.nodes)
    if (n.role == NodeRole::hidden && rng.bernoulli(rate)) n.species = pick_species(live_species, rng);
  return out;
}

// --- recombination and distance ---------------------------------------------

GeneAlignment align_genes(const ModuleChromosome& a, const ModuleChromosome& b) {
  return align_impl(a, b);
}
GeneAlignment align_genes(const BlueprintChromosome& a, const BlueprintChromosome& b) {
  return align_impl(a, b);
}

ModuleChromosome crossover(const ModuleChromosome& a, const ModuleChromosome& b, double fitness_a,
                           double fitness_b, Rng& rng) {
  return crossover_impl(a, b, fitness_a, fitness_b, rng,
                        [](const LayerGene& na, const LayerGene& nb, Rng& r) {
                          LayerGene g = r.bernoulli(0.5) ? nb : na;
                          g.params = crossover_tables(na.params, nb.params, r);
                          if (g.role == NodeRole::hidden) g.layer_kind = layer_kind_of(g.params);
                          return g;
                        });
}

BlueprintChromosome crossover(const BlueprintChromosome& a, const BlueprintChromosome& b,
                              double fitness_a, double fitness_b, Rng& rng) {
  return crossover_impl(a, b, fitness_a, fitness_b, rng,
                        [](const BlueprintNode& na, const BlueprintNode& nb, Rng& r) {
                          return r.bernoulli(0.5) ? nb : na;
                        });
}

double compatibility_distance(const ModuleChromosome& a, const ModuleChromosome& b,
                              const CompatibilityCoefficients& coeffs) {
  return distance_impl(a, b, coeffs, [](const LayerGene& x, const LayerGene& y) {
    return table_distance(x.params, y.params);
  });
}

double compatibility_distance(const BlueprintChromosome& a, const BlueprintChromosome& b,
                              const CompatibilityCoefficients& coeffs) {
  if (!a.globals.same_schema(b.globals))
    throw IncompatibleGenomes("blueprints built from different spaces");
  return distance_impl(a, b, coeffs, [](const BlueprintNode& x, const BlueprintNode& y) {
    return x.species == y.species ? 0.0 : 1.0;
  });
}

// --- checking -----------------------------------------------------------------

std::vector<std::string> check_invariants(const ModuleChromosome& c) {
  auto v = check_graph(c);
  for (const auto& n : c.nodes) {
    if (n.role == NodeRole::hidden && n.layer_kind != layer_kind_of(n.params))
      v.push_back("node " + std::to_string(n.innovation) + " layer kind disagrees with its table");
  }
  for (const auto& e : c.edges) {
    if (e.kind != LinkKind::cell_skip) continue;
    const auto* a = c.node(e.from);
    const auto* b = c.node(e.to);
    if (a != nullptr && b != nullptr && (!is_lstm(*a) || !is_lstm(*b)))
      v.push_back("cell_skip edge " + std::to_string(e.innovation) + " joins non-lstm nodes");
  }
  return v;
}

std::vector<std::string> check_invariants(const BlueprintChromosome& c) {
  auto v = check_graph(c);
  for (const auto& n : c.nodes)
    if (n.role == NodeRole::hidden && n.species == kNoSpecies)
      v.push_back("blueprint node " + std::to_string(n.innovation) + " has no species pointer");
  for (const auto& e : c.edges)
    if (e.kind != LinkKind::layer) v.push_back("blueprint carries a cell_skip edge");
  return v;
}

std::vector<InnovationId> active_hidden_nodes(const ModuleChromosome& c) { return active_hidden(c); }
std::vector<InnovationId> active_hidden_nodes(const BlueprintChromosome& c) {
  return active_hidden(c);
}

// --- serialization ------------------------------------------------------------

json to_json(const ModuleChromosome& c) {
  json nodes = json::array();
  for (const auto& n : c.nodes)
    nodes.push_back({{"id", n.innovation},
                     {"role", std::string(to_string(n.role))},
                     {"kind", n.layer_kind},
                     {"params", to_json(n.params)},
                     {"enabled", n.enabled}});
  return {{"id", c.id}, {"nodes", nodes}, {"edges", edges_to_json(c)}, {"globals", to_json(c.globals)}};
}

ModuleChromosome module_from_json(const json& j, const HyperparameterSpace& space) {
  ModuleChromosome c;
  c.id = j.at("id").get<GenomeId>();
  for (const auto& n : j.at("nodes")) {
    LayerGene g;
    g.innovation = n.at("id").get<InnovationId>();
    g.role = role_from_string(n.at("role").get<std::string>());
    g.layer_kind = n.at("kind").get<std::string>();
    g.params = g.role == NodeRole::hidden ? table_from_json(n.at("params"), space.node)
                                          : HyperparameterTable();
    g.enabled = n.at("enabled").get<bool>();
    c.nodes.push_back(std::move(g));
  }
  c.edges = edges_from_json(j.at("edges"));
  c.globals = table_from_json(j.at("globals"), space.global);
  canonicalize(c);
  return c;
}

json to_json(const BlueprintChromosome& c) {
  json nodes = json::array();
  for (const auto& n : c.nodes)
    nodes.push_back({{"id", n.innovation},
                     {"role", std::string(to_string(n.role))},
                     {"species", n.species},
                     {"enabled", n.enabled}});
  return {{"id", c.id}, {"nodes", nodes}, {"edges", edges_to_json(c)}, {"globals", to_json(c.globals)}};
}

BlueprintChromosome blueprint_from_json(const json& j, const HyperparameterSpace& space) {
  BlueprintChromosome c;
  c.id = j.at("id").get<GenomeId>();
  for (const auto& n : j.at("nodes"))
    c.nodes.push_back({n.at("id").get<InnovationId>(), role_from_string(n.at("role").get<std::string>()),
                       n.at("species").get<SpeciesId>(), n.at("enabled").get<bool>()});
  c.edges = edges_from_json(j.at("edges"));
  c.globals = table_from_json(j.at("globals"), space.global);
  canonicalize(c);
  return c;
}

}  // namespace codeepneat
