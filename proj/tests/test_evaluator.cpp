#include <doctest.h>

#include <cmath>

#include "codeepneat/evaluator.hpp"
#include "support.hpp"

using namespace codeepneat;

namespace {

using S = HyperparameterSpec;

HyperparameterSpace small_dense_space() {
  return HyperparameterSpace::make(
      {S::integer("layer_size", 3, 6),
       S::categorical("layer_activation", {std::string("relu"), std::string("linear")})},
      {});
}

AssemblyOptions task_options(MergeMethod method = MergeMethod::concatenate) {
  AssemblyOptions opts;
  opts.policy = {method, Downsample::dense_bottleneck};
  opts.input_shape = {2, 1, 1};
  opts.output_units = 2;
  return opts;
}

// input -> dense(size) -> output
AssembledNetwork single_dense(std::int64_t size, double lr, double momentum) {
  const auto space = HyperparameterSpace::make({S::integer("layer_size", 1, 256)}, {});
  Rng rng(1);
  auto m = minimal_chromosome(space, rng);
  m.nodes[2].params = HyperparameterTable(space.node, {size});
  auto net = assemble(m, task_options());
  net.globals = {{"learning_rate", lr}, {"momentum", momentum}};
  return net;
}

// Chain of n dense nodes of size 8 (n >= 1), used for the surrogate.
AssembledNetwork dense_chain(int n, std::int64_t size = 8) {
  const auto space = HyperparameterSpace::make({S::integer("layer_size", 1, 256)}, {});
  Rng rng(2);
  InnovationRegistry registry;
  auto m = minimal_chromosome(space, rng);
  for (int i = 1; i < n; ++i) {
    const auto e = std::find_if(m.edges.begin(), m.edges.end(), [](const auto& g) {
      return g.enabled && g.to == kOutputNodeId;
    });
    m = split_edge(m, e->innovation, space, registry, rng).chromosome;
  }
  for (auto& node : m.nodes)
    if (node.role == NodeRole::hidden) node.params = HyperparameterTable(space.node, {size});
  return assemble(m, {});
}

}  // namespace

TEST_SUITE("evaluator") {
  TEST_CASE("surrogate closed forms") {
    const auto net = dense_chain(3);
    REQUIRE(compute_depth(net) == 3);
    StructuralTarget exact{3.0, 1.0, 1.0, {}};
    CHECK(surrogate_fitness(net, exact).fitness == 1.0);

    StructuralTarget off_by_one{4.0, 1.0, 0.0, {}};
    CHECK(surrogate_fitness(net, off_by_one).fitness == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(surrogate_fitness(net, off_by_one).fitness == doctest::Approx(0.3679).epsilon(1e-4));

    StructuralTarget with_param{3.0, 1.0, 1.0, {{"layer_size", ParamTarget::Scope::node, 8.0, 4.0}}};
    CHECK(surrogate_fitness(net, with_param).fitness == 1.0);
    const auto wider = dense_chain(3, 16);
    // ((16 - 8) / 4)^2 = 4
    CHECK(surrogate_fitness(wider, with_param).fitness == doctest::Approx(std::exp(-4.0)).epsilon(1e-15));

    StructuralTarget missing{3.0, 1.0, 1.0, {{"momentum", ParamTarget::Scope::global, 0.9, 0.1}}};
    CHECK(surrogate_fitness(net, missing).fitness == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  }

  TEST_CASE("surrogate falls as the depth error grows") {
    StructuralTarget target{1.0, 1.0, 0.0, {}};
    double last = 2.0;
    for (int n = 1; n <= 6; ++n) {
      const double f = surrogate_fitness(dense_chain(n), target).fitness;
      CHECK(f < last);
      CHECK(f > 0.0);
      CHECK(f <= 1.0);
      last = f;
    }
  }

  TEST_CASE("surrogate is pure and rebuilds from its description") {
    StructuralTarget target{5.0, 0.5, 1.0, {{"layer_size", ParamTarget::Scope::node, 20.0, 10.0}}};
    const SurrogateEvaluator eval(target);
    const auto net = dense_chain(2);
    const auto a = eval.evaluate(net, {});
    const auto b = make_evaluator(eval.describe())->evaluate(net, {});
    CHECK(a.fitness == b.fitness);
    CHECK(eval.deterministic());
  }

  TEST_CASE("synthetic tasks") {
    for (auto kind : {TaskKind::two_gaussians, TaskKind::xor_grid, TaskKind::spirals}) {
      const auto t = synthetic_task(kind, 1000, 3);
      CHECK(t.train.rows == 850);
      CHECK(t.validation.rows == 150);
      std::size_t ones = 0;
      for (int y : t.train.y) ones += y == 1;
      for (int y : t.validation.y) ones += y == 1;
      CHECK(ones == 500);
      CHECK(synthetic_task(kind, 1000, 3) == t);
      CHECK_FALSE(synthetic_task(kind, 1000, 4) == t);
    }
    CHECK_THROWS(synthetic_task(TaskKind::two_gaussians, 39, 1));
  }

  TEST_CASE("budget needs at least one epoch") {
    EvaluationBudget b;
    b.epochs = 0;
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);
    const auto task = synthetic_task(TaskKind::two_gaussians, 200, 1);
    CHECK_THROWS_AS(train_network(single_dense(4, 0.05, 0.9), task, b), std::invalid_argument);
  }

  TEST_CASE("one dense layer separates the gaussians") {
    const auto task = synthetic_task(TaskKind::two_gaussians, 1000, 5);
    EvaluationBudget budget{50, 0, 9};
    const auto r = train_network(single_dense(8, 0.05, 0.9), task, budget);
    CHECK_FALSE(r.diverged);
    CHECK(r.validation_accuracy >= 0.95);
  }

  TEST_CASE("training loss does not rise on the linear task") {
    const auto task = synthetic_task(TaskKind::two_gaussians, 1000, 5);
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto r = train_network(single_dense(8, 0.01, 0.0), task, {20, 0, seed});
      for (std::size_t i = 1; i < r.train_loss.size(); ++i)
        CHECK(r.train_loss[i] <= r.train_loss[i - 1]);
    }
  }

  TEST_CASE("same seed gives the same fitness") {
    const TrainerEvaluator eval(TaskKind::xor_grid, 400, 2);
    const auto net = single_dense(16, 0.05, 0.9);
    const auto a = eval.evaluate(net, {5, 0, 11});
    const auto b = eval.evaluate(net, {5, 0, 11});
    CHECK(a.fitness == b.fitness);
    CHECK(a.diagnostics == b.diagnostics);
    const auto c = make_evaluator(eval.describe())->evaluate(net, {5, 0, 11});
    CHECK(c.fitness == a.fitness);
  }

  TEST_CASE("gradient check on a dense chain") {
    const auto space = small_dense_space();
    const auto task = synthetic_task(TaskKind::spirals, 200, 3);
    Rng rng(4);
    InnovationRegistry registry;
    for (int trial = 0; trial < 10; ++trial) {
      auto m = minimal_chromosome(space, rng);
      for (int i = 0; i < 3; ++i) m = mutate_add_node(m, space, registry, rng).chromosome;
      const auto net = assemble(m, task_options());
      const auto r = gradient_check(net, task, {1e-5, 16, static_cast<std::uint64_t>(trial), false});
      CHECK(r.analytic.size() <= 1000);
      CHECK(r.max_relative_error < 1e-4);
    }
  }

  TEST_CASE("gradient check through merges and bottlenecks") {
    const auto space = small_dense_space();
    const auto task = synthetic_task(TaskKind::xor_grid, 200, 3);
    Rng rng(5);
    InnovationRegistry registry;
    std::set<std::string> seen;
    for (int trial = 0; trial < 30; ++trial) {
      auto m = support::grow_module(space, registry, rng, 8);
      const auto method = trial % 2 ? MergeMethod::element_wise_sum : MergeMethod::concatenate;
      const auto net = assemble(m, task_options(method));
      for (const auto& l : net.layers) {
        if (l.kind == kinds::merge) seen.insert(to_string(l.params.at("method")));
        if (l.kind == kinds::bottleneck) seen.insert(kinds::bottleneck);
      }
      const auto r = gradient_check(net, task, {1e-5, 16, static_cast<std::uint64_t>(trial), false});
      CHECK(r.max_relative_error < 1e-4);
    }
    CHECK(seen.count("concatenate"));
    CHECK(seen.count("element_wise_sum"));
    CHECK(seen.count(kinds::bottleneck));
  }

  TEST_CASE("zero weights give mirrored units equal gradients") {
    const auto task = synthetic_task(TaskKind::two_gaussians, 200, 1);
    const auto net = single_dense(5, 0.01, 0.0);
    const auto r = gradient_check(net, task, {1e-5, 32, 0, true});
    for (const auto& b : r.blocks)
      for (std::size_t row = 0; row < b.rows; ++row)
        for (std::size_t col = 1; col < b.cols; ++col)
          CHECK(r.analytic[b.offset + row * b.cols + col] == r.analytic[b.offset + row * b.cols]);
  }

  TEST_CASE("unsupported kinds raise a capability error") {
    const TrainerEvaluator eval(TaskKind::two_gaussians, 200, 1);
    const auto space = support::lstm_space();
    Rng rng(6);
    const auto net = assemble(minimal_chromosome(space, rng), task_options());
    CHECK_THROWS_AS(eval.evaluate(net, {}), CapabilityError);
    const auto r = evaluate_safely(eval, {net, {}}, 0.0);
    CHECK(r.failed);
    CHECK(r.fitness == 0.0);
    CHECK(r.diagnostics.contains("error"));
    CHECK_FALSE(eval.capabilities().count(kinds::lstm));
  }

  TEST_CASE("divergence returns the floor") {
    const TrainerEvaluator eval(TaskKind::two_gaussians, 400, 1);
    const auto net = single_dense(8, 1e200, 0.99);
    const auto r = eval.evaluate(net, {20, 0, 1});
    CHECK(r.fitness == 0.0);
    CHECK(r.diagnostics.at("diverged").get<bool>());
    InProcessBackend backend(std::make_shared<TrainerEvaluator>(TaskKind::two_gaussians, 400, 1));
    const auto reports = backend.evaluate_all({{net, {20, 0, 1}}});
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].fitness == 0.0);
  }

  TEST_CASE("fitness report JSON round trip") {
    FitnessReport r{42, 0.75, {{"train_loss", {0.5, 0.4}}}, false};
    const auto back = fitness_report_from_json(to_json(r));
    CHECK(back.network_id == 42);
    CHECK(back.fitness == 0.75);
    CHECK(back.diagnostics == r.diagnostics);
    CHECK_FALSE(back.failed);
  }
}
