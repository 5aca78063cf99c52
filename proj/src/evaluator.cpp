#include "codeepneat/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace codeepneat {

void EvaluationBudget::validate() const {
  if (epochs < 1) throw std::invalid_argument("evaluation budget needs at least one epoch");
}

json to_json(const FitnessReport& report) {
  return {{"network_id", report.network_id},
          {"fitness", report.fitness},
          {"diagnostics", report.diagnostics},
          {"failed", report.failed}};
}

FitnessReport fitness_report_from_json(const json& j) {
  FitnessReport r;
  r.network_id = j.at("network_id").get<std::uint64_t>();
  r.fitness = j.at("fitness").get<double>();
  r.diagnostics = j.value("diagnostics", json::object());
  r.failed = j.value("failed", false);
  return r;
}

// --- surrogate ------------------------------------------------------------------

json to_json(const StructuralTarget& target) {
  json params = json::array();
  for (const auto& p : target.params)
    params.push_back({{"name", p.name},
                      {"scope", p.scope == ParamTarget::Scope::node ? "node" : "global"},
                      {"value", p.value},
                      {"scale", p.scale}});
  return {{"depth", target.depth},
          {"depth_weight", target.depth_weight},
          {"param_weight", target.param_weight},
          {"params", params}};
}

StructuralTarget structural_target_from_json(const json& j) {
  StructuralTarget t;
  t.depth = j.value("depth", t.depth);
  t.depth_weight = j.value("depth_weight", t.depth_weight);
  t.param_weight = j.value("param_weight", t.param_weight);
  for (const auto& p : j.value("params", json::array())) {
    ParamTarget pt;
    pt.name = p.at("name").get<std::string>();
    const auto scope = p.value("scope", std::string("node"));
    if (scope != "node" && scope != "global")
      throw std::invalid_argument("target parameter scope must be node or global");
    pt.scope = scope == "node" ? ParamTarget::Scope::node : ParamTarget::Scope::global;
    pt.value = p.at("value").get<double>();
    pt.scale = p.value("scale", 1.0);
    if (!(pt.scale > 0.0)) throw std::invalid_argument("target parameter scale must be positive");
    t.params.push_back(std::move(pt));
  }
  return t;
}

namespace {

bool is_compute(const std::string& kind) {
  return kind == kinds::dense || kind == kinds::conv || kind == kinds::lstm;
}

}  // namespace

int compute_depth(const AssembledNetwork& net) {
  std::vector<int> depth(net.layers.size(), 0);
  int result = 0;
  for (const auto& l : net.layers) {
    int best = 0;
    for (int p : net.parents(l.id)) best = std::max(best, depth[static_cast<std::size_t>(p)]);
    depth[static_cast<std::size_t>(l.id)] = best + (is_compute(l.kind) ? 1 : 0);
    if (l.kind == kinds::output) result = depth[static_cast<std::size_t>(l.id)];
  }
  return result;
}

FitnessReport surrogate_fitness(const AssembledNetwork& net, const StructuralTarget& target) {
  const int depth = compute_depth(net);
  const double depth_error = std::pow(static_cast<double>(depth) - target.depth, 2.0);
  double param_error = 0.0;
  for (const auto& p : target.params) {
    const auto sq = [&](const ParamValue& v) {
      const double d = (as_number(v) - p.value) / p.scale;
      return d * d;
    };
    if (p.scope == ParamTarget::Scope::global) {
      auto it = net.globals.find(p.name);
      param_error += it == net.globals.end() ? 1.0 : sq(it->second);
      continue;
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& l : net.layers) {
      auto it = l.params.find(p.name);
      if (!l.origin || !is_compute(l.kind) || it == l.params.end()) continue;
      sum += sq(it->second);
      ++count;
    }
    param_error += count == 0 ? 1.0 : sum / static_cast<double>(count);
  }
  FitnessReport r;
  r.network_id = net.provenance.network_id;
  r.fitness = std::exp(-(target.depth_weight * depth_error + target.param_weight * param_error));
  r.diagnostics = {{"depth", depth}, {"depth_error", depth_error}, {"param_error", param_error}};
  return r;
}

FitnessReport SurrogateEvaluator::evaluate(const AssembledNetwork& net,
                                           const EvaluationBudget& budget) const {
  budget.validate();
  return surrogate_fitness(net, target_);
}

std::set<std::string> SurrogateEvaluator::capabilities() const {
  return {kinds::input, kinds::output, kinds::dense,    kinds::conv,
          kinds::lstm,  kinds::merge,  kinds::max_pool, kinds::bottleneck};
}

json SurrogateEvaluator::describe() const {
  return {{"kind", "surrogate"}, {"target", to_json(target_)}};
}

// --- synthetic tasks -----------------------------------------------------------

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::two_gaussians: return "two_gaussians";
    case TaskKind::xor_grid: return "xor_grid";
    case TaskKind::spirals: return "spirals";
  }
  return "two_gaussians";
}

TaskKind task_kind_from_string(std::string_view s) {
  if (s == "two_gaussians") return TaskKind::two_gaussians;
  if (s == "xor_grid") return TaskKind::xor_grid;
  if (s == "spirals") return TaskKind::spirals;
  throw std::invalid_argument("unknown task '" + std::string(s) + "'");
}

namespace {

std::pair<double, double> sample_point(TaskKind kind, int label, Rng& rng) {
  switch (kind) {
    case TaskKind::two_gaussians: {
      const double m = label == 0 ? -1.5 : 1.5;
      return {rng.normal(m, 0.5), rng.normal(m, 0.5)};
    }
    case TaskKind::xor_grid: {
      // Class 0 occupies quadrants with matching signs, class 1 the others.
      const double sx = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const double sy = label == 0 ? sx : -sx;
      return {sx * rng.uniform(0.05, 1.0), sy * rng.uniform(0.05, 1.0)};
    }
    case TaskKind::spirals: {
      const double t = rng.uniform(0.05, 1.0);
      const double angle = 3.0 * std::numbers::pi * t + (label == 0 ? 0.0 : std::numbers::pi);
      return {t * std::cos(angle) + rng.normal(0.0, 0.03), t * std::sin(angle) + rng.normal(0.0, 0.03)};
    }
  }
  return {0.0, 0.0};
}

}  // namespace

SyntheticTask synthetic_task(TaskKind kind, std::size_t n, std::uint64_t seed) {
  if (n < 40) throw std::invalid_argument("synthetic tasks need at least 40 samples");
  Rng rng(seed);
  std::vector<std::pair<double, double>> points;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i < n / 2 ? 0 : 1;
    points.push_back(sample_point(kind, label, rng));
    labels.push_back(label);
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

  const auto validation = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n)));
  SyntheticTask task;
  task.kind = kind;
  task.classes = 2;
  for (auto* d : {&task.train, &task.validation}) d->cols = 2;
  for (std::size_t k = 0; k < n; ++k) {
    auto& d = k < n - validation ? task.train : task.validation;
    const auto i = order[k];
    d.x.push_back(points[i].first);
    d.x.push_back(points[i].second);
    d.y.push_back(labels[i]);
    ++d.rows;
  }
  return task;
}

// --- factory ----------------------------------------------------------------------

EvaluatorPtr make_evaluator(const json& description) {
  const auto kind = description.at("kind").get<std::string>();
  if (kind == "surrogate")
    return std::make_shared<SurrogateEvaluator>(
        structural_target_from_json(description.value("target", json::object())));
  if (kind == "trainer")
    return std::make_shared<TrainerEvaluator>(
        task_kind_from_string(description.value("task", std::string("two_gaussians"))),
        description.value("samples", std::size_t{400}), description.value("seed", std::uint64_t{0}));
  throw std::invalid_argument("unknown evaluator kind '" + kind + "'");
}

// --- backends ---------------------------------------------------------------------

FitnessReport evaluate_safely(const Evaluator& evaluator, const EvalRequest& request, double floor) {
  FitnessReport r;
  try {
    r = evaluator.evaluate(request.network, request.budget);
    if (!std::isfinite(r.fitness)) {
      r.fitness = floor;
      r.failed = true;
      r.diagnostics["error"] = "non-finite fitness";
    }
  } catch (const std::exception& e) {
    r = FitnessReport{};
    r.fitness = floor;
    r.failed = true;
    r.diagnostics = {{"error", e.what()}};
  }
  r.network_id = request.network.provenance.network_id;
  return r;
}

std::vector<FitnessReport> InProcessBackend::evaluate_all(const std::vector<EvalRequest>& requests) {
  std::vector<FitnessReport> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(evaluate_safely(*evaluator_, r, floor_));
  return out;
}

}  // namespace codeepneat
