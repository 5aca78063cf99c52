#include "codeepneat/assembly.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <set>
#include <sstream>

namespace codeepneat {

std::string Shape::to_string() const {
  if (!spatial()) return std::to_string(channels);
  return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

std::string_view to_string(MergeMethod m) {
  return m == MergeMethod::concatenate ? "concatenate" : "element_wise_sum";
}

std::string_view to_string(Downsample d) {
  return d == Downsample::max_pool ? "max_pool" : "dense_bottleneck";
}

MergeMethod merge_method_from_string(std::string_view s) {
  if (s == "concatenate" || s == "concat") return MergeMethod::concatenate;
  if (s == "element_wise_sum" || s == "sum") return MergeMethod::element_wise_sum;
  throw std::invalid_argument("unknown merge method '" + std::string(s) + "'");
}

Downsample downsample_from_string(std::string_view s) {
  if (s == "max_pool") return Downsample::max_pool;
  if (s == "dense_bottleneck") return Downsample::dense_bottleneck;
  throw std::invalid_argument("unknown downsample method '" + std::string(s) + "'");
}

std::vector<int> AssembledNetwork::parents(int layer) const {
  std::vector<int> out;
  for (const auto& [a, b] : edges)
    if (b == layer) out.push_back(a);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> AssembledNetwork::children(int layer) const {
  std::vector<int> out;
  for (const auto& [a, b] : edges)
    if (a == layer) out.push_back(b);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::optional<std::int64_t> int_param(const ParamMap& params, std::initializer_list<const char*> names) {
  for (const auto* name : names) {
    auto it = params.find(name);
    if (it != params.end()) return static_cast<std::int64_t>(std::llround(as_number(it->second)));
  }
  return std::nullopt;
}

bool bool_param(const ParamMap& params, const char* name) {
  auto it = params.find(name);
  return it != params.end() && as_number(it->second) != 0.0;
}

Shape merged_shape(MergeMethod method, const std::vector<Shape>& parents) {
  const bool same_spatial = std::all_of(parents.begin(), parents.end(), [&](const Shape& s) {
    return s.height == parents[0].height && s.width == parents[0].width;
  });
  if (same_spatial) {
    if (method == MergeMethod::concatenate) {
      Shape out{0, parents[0].height, parents[0].width};
      for (const auto& s : parents) out.channels += s.channels;
      return out;
    }
    for (const auto& s : parents)
      if (s.channels != parents[0].channels)
        throw AssemblyError("element-wise sum over inputs with different channel counts", {});
    return parents[0];
  }
  if (method == MergeMethod::concatenate) {
    Shape out{0, 1, 1};
    for (const auto& s : parents) out.channels += s.total();
    return out;
  }
  for (const auto& s : parents)
    if (s.total() != parents[0].total())
      throw AssemblyError("element-wise sum over inputs of different sizes", {});
  return {parents[0].total(), 1, 1};
}

}  // namespace

Shape infer_shape(const std::string& kind, const ParamMap& params,
                  const std::vector<Shape>& parents) {
  if (kind == kinds::input) {
    if (!parents.empty()) throw AssemblyError("input layer with parents", {});
    return {int_param(params, {"channels"}).value_or(1), int_param(params, {"height"}).value_or(1),
            int_param(params, {"width"}).value_or(1)};
  }
  if (kind == kinds::merge) {
    if (parents.size() < 2) throw AssemblyError("merge layer with fewer than two inputs", {});
    auto it = params.find("method");
    const auto method = it == params.end() ? MergeMethod::concatenate
                                           : merge_method_from_string(to_string(it->second));
    return merged_shape(method, parents);
  }
  if (parents.size() != 1)
    throw AssemblyError("layer of kind '" + kind + "' needs exactly one input", {});
  const Shape& in = parents[0];
  if (kind == kinds::output) return {int_param(params, {"units"}).value_or(in.total()), 1, 1};
  if (kind == kinds::dense || kind == kinds::lstm)
    return {int_param(params, {"layer_size", "units"}).value_or(in.total()), 1, 1};
  if (kind == kinds::conv) {
    Shape out{int_param(params, {"num_filters"}).value_or(in.channels), in.height, in.width};
    if (bool_param(params, "max_pooling")) {
      out.height = std::max<std::int64_t>(1, out.height / 2);
      out.width = std::max<std::int64_t>(1, out.width / 2);
    }
    return out;
  }
  if (kind == kinds::max_pool)
    return {in.channels, int_param(params, {"output_height"}).value_or(in.height),
            int_param(params, {"output_width"}).value_or(in.width)};
  if (kind == kinds::bottleneck) {
    const auto units = int_param(params, {"units"}).value_or(in.channels);
    return bool_param(params, "keep_spatial") ? Shape{units, in.height, in.width}
                                              : Shape{units, 1, 1};
  }
  throw AssemblyError("unknown layer kind '" + kind + "'", {});
}

namespace {

struct RawNode {
  std::string kind;
  ParamMap params;
  std::optional<LayerOrigin> origin;
  bool identity = false;
  InnovationId ref = 0;  // genome node reported in errors
};

class RawGraph {
 public:
  int add(RawNode node) {
    nodes_.emplace(next_, std::move(node));
    return next_++;
  }
  RawNode& node(int id) { return nodes_.at(id); }
  const std::map<int, RawNode>& nodes() const { return nodes_; }
  std::set<std::pair<int, int>>& edges() { return edges_; }
  std::set<std::pair<int, int>>& recurrent() { return recurrent_; }

  std::vector<int> parents(int id) const {
    std::vector<int> out;
    for (const auto& [a, b] : edges_)
      if (b == id) out.push_back(a);
    std::sort(out.begin(), out.end());
    return out;
  }
  std::vector<int> children(int id) const {
    std::vector<int> out;
    for (const auto& [a, b] : edges_)
      if (a == id) out.push_back(b);
    return out;
  }
  void erase(int id) {
    nodes_.erase(id);
    std::erase_if(edges_, [&](const auto& e) { return e.first == id || e.second == id; });
    std::erase_if(recurrent_, [&](const auto& e) { return e.first == id || e.second == id; });
  }
  // Places a new node on the edge parent->child.
  int interpose(int parent, int child, RawNode node) {
    const int id = add(std::move(node));
    edges_.erase({parent, child});
    edges_.insert({parent, id});
    edges_.insert({id, child});
    return id;
  }

  // Kahn's algorithm; ties broken by smallest id so the order is canonical.
  std::vector<int> topological_order() const {
    std::map<int, int> indegree;
    for (const auto& [id, n] : nodes_) indegree[id] = 0;
    for (const auto& e : edges_) ++indegree[e.second];
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (const auto& [id, d] : indegree)
      if (d == 0) ready.push(id);
    std::vector<int> order;
    while (!ready.empty()) {
      const int n = ready.top();
      ready.pop();
      order.push_back(n);
      for (int c : children(n))
        if (--indegree[c] == 0) ready.push(c);
    }
    if (order.size() != nodes_.size()) throw AssemblyError("assembled graph contains a cycle", {});
    return order;
  }

 private:
  std::map<int, RawNode> nodes_;
  std::set<std::pair<int, int>> edges_;
  std::set<std::pair<int, int>> recurrent_;
  int next_ = 0;
};

RawNode identity_node(InnovationId ref) { return {"identity", {}, std::nullopt, true, ref}; }

// Copies the active part of a module into the graph; returns the ids of its
// input and output splice points.
std::pair<int, int> splice_module(RawGraph& g, const ModuleChromosome& m, InnovationId bp_node) {
  std::map<InnovationId, int> local;
  for (const auto& n : m.nodes) {
    if (!n.enabled) continue;
    if (n.role == NodeRole::hidden)
      local[n.innovation] = g.add({n.layer_kind, n.params.to_map(),
                                   LayerOrigin{bp_node, m.id, n.innovation}, false, n.innovation});
    else
      local[n.innovation] = g.add(identity_node(bp_node));
  }
  for (const auto& e : m.edges) {
    if (!e.enabled || !local.count(e.from) || !local.count(e.to)) continue;
    (e.kind == LinkKind::layer ? g.edges() : g.recurrent()).insert({local[e.from], local[e.to]});
  }
  return {local.at(kInputNodeId), local.at(kOutputNodeId)};
}

RawNode input_node(const AssemblyOptions& options) {
  return {kinds::input,
          {{"channels", options.input_shape.channels},
           {"height", options.input_shape.height},
           {"width", options.input_shape.width}},
          LayerOrigin{kInputNodeId, 0, kInputNodeId},
          false,
          kInputNodeId};
}

RawNode output_node(const AssemblyOptions& options) {
  return {kinds::output, {{"units", options.output_units}}, LayerOrigin{kOutputNodeId, 0, kOutputNodeId},
          false, kOutputNodeId};
}

RawNode merge_node(MergeMethod method, InnovationId ref) {
  return {kinds::merge, {{"method", std::string(to_string(method))}}, std::nullopt, false, ref};
}

MergeMethod merge_method_for(const RawNode& consumer, const MergePolicy& policy) {
  auto it = consumer.params.find("merge_method");
  if (it == consumer.params.end()) return policy.method;
  return merge_method_from_string(to_string(it->second));
}

void contract_identities(RawGraph& g) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [id, n] : g.nodes()) {
      if (!n.identity) continue;
      const auto ps = g.parents(id);
      if (ps.size() != 1) continue;
      const auto cs = g.children(id);
      const int parent = ps[0];
      const int self = id;
      g.erase(self);
      for (int c : cs) g.edges().insert({parent, c});
      changed = true;
      break;
    }
  }
}

void insert_merges(RawGraph& g, const MergePolicy& policy) {
  std::vector<int> ids;
  for (const auto& [id, n] : g.nodes()) ids.push_back(id);
  for (int id : ids) {
    auto& n = g.node(id);
    if (n.identity) {
      n = merge_node(policy.method, n.ref);
      continue;
    }
    const auto ps = g.parents(id);
    if (ps.size() < 2) continue;
    const int m = g.add(merge_node(merge_method_for(g.node(id), policy), g.node(id).ref));
    for (int p : ps) {
      g.edges().erase({p, id});
      g.edges().insert({p, m});
    }
    g.edges().insert({m, id});
  }
}

bool merge_ok(MergeMethod method, const std::vector<Shape>& shapes) {
  try {
    merged_shape(method, shapes);
    return true;
  } catch (const AssemblyError&) {
    return false;
  }
}

// Shrinks merge inputs toward the smallest parent until the merge is valid.
void resolve_merge(RawGraph& g, int merge, std::map<int, Shape>& shapes, const MergePolicy& policy) {
  const auto method = merge_method_from_string(to_string(g.node(merge).params.at("method")));
  const auto current = [&] {
    std::vector<Shape> out;
    for (int p : g.parents(merge)) out.push_back(shapes.at(p));
    return out;
  };
  const auto all_equal = [](const std::vector<Shape>& s) {
    return std::all_of(s.begin(), s.end(), [&](const Shape& x) { return x == s[0]; });
  };
  const InnovationId ref = g.node(merge).ref;
  auto add_layer = [&](int parent, RawNode node) {
    const Shape shape = infer_shape(node.kind, node.params, {shapes.at(parent)});
    const int id = g.interpose(parent, merge, std::move(node));
    shapes[id] = shape;
  };

  if (all_equal(current())) return;

  if (policy.downsample == Downsample::max_pool) {
    const auto in = current();
    const auto smallest = *std::min_element(in.begin(), in.end(), [](const Shape& a, const Shape& b) {
      return a.height * a.width < b.height * b.width;
    });
    for (int p : g.parents(merge)) {
      const Shape s = shapes.at(p);
      if (s.height == smallest.height && s.width == smallest.width) continue;
      if (s.height < smallest.height || s.width < smallest.width) continue;
      add_layer(p, {kinds::max_pool,
                    {{"output_height", smallest.height}, {"output_width", smallest.width}},
                    std::nullopt, false, ref});
    }
    auto after = current();
    const bool spatial_match = std::all_of(after.begin(), after.end(), [&](const Shape& x) {
      return x.height == after[0].height && x.width == after[0].width;
    });
    if (spatial_match && method == MergeMethod::element_wise_sum) {
      std::int64_t min_channels = after[0].channels;
      for (const auto& s : after) min_channels = std::min(min_channels, s.channels);
      for (int p : g.parents(merge))
        if (shapes.at(p).channels > min_channels)
          add_layer(p, {kinds::bottleneck, {{"units", min_channels}, {"keep_spatial", true}},
                        std::nullopt, false, ref});
    }
    if (merge_ok(method, current())) return;
  }

  // Fully connected bottleneck down to the smallest parent size.
  const auto in = current();
  std::int64_t target = in[0].total();
  for (const auto& s : in) target = std::min(target, s.total());
  for (int p : g.parents(merge))
    if (shapes.at(p).total() > target)
      add_layer(p, {kinds::bottleneck, {{"units", target}, {"keep_spatial", false}}, std::nullopt,
                    false, ref});
  if (!merge_ok(method, current()))
    throw AssemblyError("cannot reconcile merge input sizes at genome node " + std::to_string(ref),
                        {ref});
}

AssembledNetwork finish(RawGraph& g, const AssemblyOptions& options, ParamMap globals,
                        Provenance provenance) {
  contract_identities(g);
  insert_merges(g, options.policy);

  std::map<int, Shape> shapes;
  for (int id : g.topological_order()) {
    auto& n = g.node(id);
    if (n.kind == kinds::merge) resolve_merge(g, id, shapes, options.policy);
    std::vector<Shape> in;
    for (int p : g.parents(id)) in.push_back(shapes.at(p));
    try {
      shapes[id] = infer_shape(n.kind, n.params, in);
    } catch (const AssemblyError& e) {
      throw AssemblyError(std::string(e.what()) + " (genome node " + std::to_string(n.ref) + ")",
                          {n.ref});
    }
  }

  const auto order = g.topological_order();
  std::map<int, int> renumber;
  for (std::size_t i = 0; i < order.size(); ++i) renumber[order[i]] = static_cast<int>(i);

  AssembledNetwork net;
  for (int raw : order) {
    const auto& n = g.node(raw);
    ConcreteLayer layer;
    layer.id = renumber.at(raw);
    layer.kind = n.kind;
    layer.params = n.params;
    layer.output_shape = shapes.at(raw);
    const auto ps = g.parents(raw);
    layer.input_shape = ps.size() == 1 ? shapes.at(ps[0]) : layer.output_shape;
    layer.origin = n.origin;
    net.layers.push_back(std::move(layer));
  }
  for (const auto& [a, b] : g.edges()) net.edges.emplace_back(renumber.at(a), renumber.at(b));
  for (const auto& [a, b] : g.recurrent())
    net.recurrent_edges.emplace_back(renumber.at(a), renumber.at(b));
  std::sort(net.edges.begin(), net.edges.end());
  std::sort(net.recurrent_edges.begin(), net.recurrent_edges.end());
  net.globals = std::move(globals);
  net.provenance = std::move(provenance);
  return net;
}

void require_valid(const std::vector<std::string>& violations, const std::string& what) {
  if (!violations.empty()) throw AssemblyError(what + ": " + violations.front(), {});
}

}  // namespace

AssembledNetwork assemble(const BlueprintChromosome& blueprint,
                          const std::map<SpeciesId, const ModuleChromosome*>& modules,
                          const AssemblyOptions& options) {
  require_valid(check_invariants(blueprint), "invalid blueprint " + std::to_string(blueprint.id));
  RawGraph g;
  const int in = g.add(input_node(options));
  const int out = g.add(output_node(options));

  Provenance provenance;
  provenance.blueprint_id = blueprint.id;
  std::map<InnovationId, std::pair<int, int>> ends{{kInputNodeId, {in, in}},
                                                   {kOutputNodeId, {out, out}}};
  for (const auto& n : blueprint.nodes) {
    if (n.role != NodeRole::hidden || !n.enabled) continue;
    auto it = modules.find(n.species);
    if (it == modules.end() || it->second == nullptr)
      throw AssemblyError("no module chosen for species " + std::to_string(n.species) +
                              " at blueprint node " + std::to_string(n.innovation),
                          {n.innovation});
    provenance.module_choice[n.species] = it->second->id;
    ends[n.innovation] = splice_module(g, *it->second, n.innovation);
  }
  for (const auto& e : blueprint.edges) {
    if (!e.enabled || e.kind != LinkKind::layer) continue;
    if (!ends.count(e.from) || !ends.count(e.to)) continue;
    g.edges().insert({ends[e.from].second, ends[e.to].first});
  }
  return finish(g, options, blueprint.globals.to_map(), std::move(provenance));
}

AssembledNetwork assemble(const ModuleChromosome& chromosome, const AssemblyOptions& options) {
  require_valid(check_invariants(chromosome), "invalid chromosome " + std::to_string(chromosome.id));
  RawGraph g;
  const int in = g.add(input_node(options));
  const int out = g.add(output_node(options));
  const auto [m_in, m_out] = splice_module(g, chromosome, kSeedHiddenId);
  g.edges().insert({in, m_in});
  g.edges().insert({m_out, out});
  // A lone chromosome has no blueprint node; its layers keep the chromosome
  // id and node ids, with blueprint_node left at the hidden seed marker.
  Provenance provenance;
  provenance.blueprint_id = chromosome.id;
  return finish(g, options, chromosome.globals.to_map(), std::move(provenance));
}

void infer_sizes(AssembledNetwork& net) {
  for (auto& layer : net.layers) {
    std::vector<Shape> in;
    for (int p : net.parents(layer.id)) in.push_back(net.layers.at(static_cast<std::size_t>(p)).output_shape);
    layer.output_shape = infer_shape(layer.kind, layer.params, in);
    layer.input_shape = in.size() == 1 ? in[0] : layer.output_shape;
  }
}

std::vector<std::string> check_network(const AssembledNetwork& net) {
  std::vector<std::string> v;
  const int n = static_cast<int>(net.layers.size());
  for (int i = 0; i < n; ++i)
    if (net.layers[static_cast<std::size_t>(i)].id != i) v.push_back("layer ids are not 0..n-1");
  for (const auto& [a, b] : net.edges)
    if (a < 0 || b < 0 || a >= n || b >= n) {
      v.push_back("edge references a missing layer");
      return v;
    }
  for (const auto& [a, b] : net.edges)
    if (a >= b) v.push_back("edge " + std::to_string(a) + "->" + std::to_string(b) + " breaks topological numbering");

  int inputs = 0, outputs = 0;
  for (const auto& l : net.layers) {
    inputs += l.kind == kinds::input;
    outputs += l.kind == kinds::output;
  }
  if (inputs != 1) v.push_back("expected exactly one input layer");
  if (outputs != 1) v.push_back("expected exactly one output layer");

  // Edges ascend, so forward/backward sweeps in id order compute reachability.
  std::vector<char> from_input(static_cast<std::size_t>(n)), to_output(static_cast<std::size_t>(n));
  for (const auto& l : net.layers) {
    if (l.kind == kinds::input) from_input[static_cast<std::size_t>(l.id)] = 1;
    if (l.kind == kinds::output) to_output[static_cast<std::size_t>(l.id)] = 1;
  }
  auto sorted = net.edges;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& [a, b] : sorted)
    if (from_input[static_cast<std::size_t>(a)]) from_input[static_cast<std::size_t>(b)] = 1;
  for (int id = n - 1; id >= 0; --id)
    for (int c : net.children(id))
      if (to_output[static_cast<std::size_t>(c)]) to_output[static_cast<std::size_t>(id)] = 1;
  for (const auto& l : net.layers)
    if (!from_input[static_cast<std::size_t>(l.id)] || !to_output[static_cast<std::size_t>(l.id)])
      v.push_back("layer " + std::to_string(l.id) + " is not on an input->output path");

  for (const auto& l : net.layers) {
    const auto ps = net.parents(l.id);
    if (l.kind == kinds::input) {
      if (!ps.empty()) v.push_back("input layer has parents");
      continue;
    }
    if (l.kind == kinds::output && !net.children(l.id).empty()) v.push_back("output layer has children");
    if (l.kind != kinds::merge && ps.size() != 1) {
      v.push_back("layer " + std::to_string(l.id) + " has " + std::to_string(ps.size()) +
                  " parents and is not a merge");
      continue;
    }
    std::vector<Shape> in;
    for (int p : ps) in.push_back(net.layers[static_cast<std::size_t>(p)].output_shape);
    if (l.kind != kinds::merge && l.input_shape != in[0])
      v.push_back("layer " + std::to_string(l.id) + " input shape differs from its parent output");
    try {
      if (infer_shape(l.kind, l.params, in) != l.output_shape)
        v.push_back("layer " + std::to_string(l.id) + " output shape is inconsistent");
    } catch (const AssemblyError& e) {
      v.push_back("layer " + std::to_string(l.id) + ": " + e.what());
    }
  }
  return v;
}

std::map<GenomeId, std::size_t> module_copies(const AssembledNetwork& net) {
  std::map<GenomeId, std::set<InnovationId>> seen;
  for (const auto& l : net.layers)
    if (l.origin && l.kind != kinds::input && l.kind != kinds::output)
      seen[l.origin->module_id].insert(l.origin->blueprint_node);
  std::map<GenomeId, std::size_t> out;
  for (const auto& [m, nodes] : seen) out[m] = nodes.size();
  return out;
}

std::string export_dot(const AssembledNetwork& net) {
  std::ostringstream out;
  out << "digraph network {\n  rankdir=TB;\n";
  for (const auto& l : net.layers)
    out << "  n" << l.id << " [label=\"" << l.kind << "\\n" << l.output_shape.to_string() << "\"];\n";
  for (const auto& [a, b] : net.edges) out << "  n" << a << " -> n" << b << ";\n";
  for (const auto& [a, b] : net.recurrent_edges)
    out << "  n" << a << " -> n" << b << " [style=dashed, constraint=false];\n";
  out << "}\n";
  return out.str();
}

json to_json(const Shape& shape) { return json::array({shape.channels, shape.height, shape.width}); }

Shape shape_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("shape must be [c, h, w]");
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>()};
}

json to_json(const AssembledNetwork& net) {
  json layers = json::array();
  for (const auto& l : net.layers) {
    json origin = nullptr;
    if (l.origin)
      origin = {{"blueprint_node", l.origin->blueprint_node},
                {"module_id", l.origin->module_id},
                {"module_node", l.origin->module_node}};
    layers.push_back({{"id", l.id},
                      {"kind", l.kind},
                      {"params", to_json(l.params)},
                      {"input_shape", to_json(l.input_shape)},
                      {"output_shape", to_json(l.output_shape)},
                      {"origin", origin}});
  }
  json choice = json::object();
  for (const auto& [s, m] : net.provenance.module_choice) choice[std::to_string(s)] = m;
  return {{"layers", layers},
          {"edges", net.edges},
          {"recurrent_edges", net.recurrent_edges},
          {"globals", to_json(net.globals)},
          {"provenance",
           {{"network_id", net.provenance.network_id},
            {"blueprint_id", net.provenance.blueprint_id},
            {"module_choice", choice}}}};
}

AssembledNetwork network_from_json(const json& j) {
  AssembledNetwork net;
  for (const auto& lj : j.at("layers")) {
    ConcreteLayer l;
    l.id = lj.at("id").get<int>();
    l.kind = lj.at("kind").get<std::string>();
    l.params = param_map_from_json(lj.at("params"));
    l.input_shape = shape_from_json(lj.at("input_shape"));
    l.output_shape = shape_from_json(lj.at("output_shape"));
    if (!lj.at("origin").is_null()) {
      const auto& o = lj.at("origin");
      l.origin = LayerOrigin{o.at("blueprint_node").get<InnovationId>(),
                             o.at("module_id").get<GenomeId>(), o.at("module_node").get<InnovationId>()};
    }
    net.layers.push_back(std::move(l));
  }
  net.edges = j.at("edges").get<std::vector<std::pair<int, int>>>();
  net.recurrent_edges = j.value("recurrent_edges", std::vector<std::pair<int, int>>{});
  net.globals = param_map_from_json(j.value("globals", json::object()));
  if (j.contains("provenance")) {
    const auto& p = j.at("provenance");
    net.provenance.network_id = p.value("network_id", std::uint64_t{0});
    net.provenance.blueprint_id = p.value("blueprint_id", GenomeId{0});
    const json choice = p.value("module_choice", json::object());
    for (const auto& [k, v] : choice.items())
      net.provenance.module_choice[std::stoll(k)] = v.get<GenomeId>();
  }
  return net;
}

std::string export_json(const AssembledNetwork& net) { return to_json(net).dump(2) + "\n"; }

}  // namespace codeepneat
