#include "codeepneat/config.hpp"

namespace codeepneat {

using S = HyperparameterSpec;

HyperparameterSpace cifar10_space() {
  return HyperparameterSpace::make(
      {
          S::integer("num_filters", 32, 256),
          S::real("dropout_rate", 0.0, 0.7),
          S::real("initial_weight_scaling", 0.0, 2.0),
          S::categorical("kernel_size", {std::int64_t{1}, std::int64_t{3}}),
          S::binary("max_pooling"),
      },
      {
          S::real("learning_rate", 0.0001, 0.1),
          S::real("momentum", 0.68, 0.99),
          S::real("hue_shift", 0.0, 45.0),
          S::real("saturation_value_shift", 0.0, 0.5),
          S::real("saturation_value_scale", 0.0, 0.5),
          S::integer("cropped_image_size", 26, 32),
          S::real("spatial_scaling", 0.0, 0.3),
          S::binary("random_horizontal_flips"),
          S::binary("variance_normalization"),
          S::binary("nesterov"),
      },
      {}, "conv");
}

// Fixed training constants are singleton choices so that they travel with
// every genome's global table.
HyperparameterSpace lstm_ptb_space() {
  return HyperparameterSpace::make(
      {
          S::categorical("layer_type", {std::string("lstm")}),
          S::categorical("layer_size", {std::int64_t{650}}),
      },
      {
          S::categorical("init_weight_range", {0.05}),
          S::categorical("unroll_steps", {std::int64_t{35}}),
          S::categorical("batch_size", {std::int64_t{20}}),
          S::categorical("learning_rate_decay", {0.8}),
          S::categorical("decay_every_epochs", {std::int64_t{6}}),
          S::categorical("dropout_rate", {0.5}),
          S::categorical("gradient_clip_norm", {5.0}),
      },
      "layer_type", "lstm");
}

HyperparameterSpace captioning_space() {
  return HyperparameterSpace::make(
      {
          S::categorical("layer_type", {std::string("dense"), std::string("lstm")}),
          S::categorical("merge_method", {std::string("sum"), std::string("concat")}),
          S::categorical("layer_size", {std::int64_t{128}, std::int64_t{256}}),
          S::categorical("layer_activation", {std::string("relu"), std::string("linear")}),
          S::real("layer_dropout", 0.0, 0.7),
      },
      {
          S::real("learning_rate", 0.0001, 0.1),
          S::real("momentum", 0.68, 0.99),
          S::integer("shared_embedding_size", 128, 512),
          S::real("embedding_dropout", 0.0, 0.7),
          S::binary("lstm_recurrent_dropout"),
          S::binary("nesterov"),
          S::categorical("weight_initialization",
                         {std::string("glorot_normal"), std::string("he_normal")}),
      },
      "layer_type", "dense");
}

HyperparameterSpace surrogate_demo_space() {
  return HyperparameterSpace::make(
      {
          S::integer("layer_size", 16, 256),
          S::real("dropout_rate", 0.0, 0.7),
      },
      {
          S::real("learning_rate", 0.0001, 0.1),
      });
}

HyperparameterSpace dense_demo_space() {
  return HyperparameterSpace::make(
      {
          S::integer("layer_size", 4, 64),
          S::categorical("layer_activation", {std::string("relu"), std::string("linear")}),
          S::real("dropout_rate", 0.0, 0.3),
      },
      {
          S::real("learning_rate", 0.005, 0.3),
          S::real("momentum", 0.5, 0.95),
          S::binary("nesterov"),
          S::categorical("weight_initialization",
                         {std::string("glorot_normal"), std::string("he_normal")}),
      });
}

namespace {

json surrogate(double depth, std::vector<ParamTarget> params = {}, double depth_weight = 1.0,
               double param_weight = 1.0) {
  StructuralTarget t;
  t.depth = depth;
  t.depth_weight = depth_weight;
  t.param_weight = param_weight;
  t.params = std::move(params);
  return SurrogateEvaluator(t).describe();
}

ReproductionConfig sized(std::size_t n) {
  ReproductionConfig r;
  r.population_size = n;
  return r;
}

EvolutionConfig cifar10() {
  EvolutionConfig c;
  c.preset = "cifar10";
  c.mode = RunMode::codeepneat;
  c.space = cifar10_space();
  c.generations = 72;
  c.co.blueprints = sized(25);
  c.co.modules = sized(45);
  c.co.assembly_count = 100;
  c.co.budget.epochs = 8;
  c.co.assembly.policy = {MergeMethod::concatenate, Downsample::max_pool};
  c.co.assembly.input_shape = {3, 32, 32};
  c.co.assembly.output_units = 10;
  c.evaluator = surrogate(6.0);
  return c;
}

EvolutionConfig lstm_ptb() {
  EvolutionConfig c;
  c.preset = "lstm-ptb";
  c.mode = RunMode::deepneat;
  c.space = lstm_ptb_space();
  c.generations = 25;
  c.population = sized(50);
  c.co.budget.epochs = 39;
  c.co.assembly.policy = {MergeMethod::concatenate, Downsample::dense_bottleneck};
  c.co.assembly.input_shape = {650, 1, 1};
  c.co.assembly.output_units = 10000;
  c.evaluator = surrogate(2.0);
  return c;
}

EvolutionConfig captioning() {
  EvolutionConfig c;
  c.preset = "captioning";
  c.mode = RunMode::codeepneat;
  c.space = captioning_space();
  c.generations = 30;
  c.co.blueprints = sized(25);
  c.co.modules = sized(45);
  c.co.assembly_count = 100;
  c.co.budget.epochs = 6;
  c.co.assembly.policy = {MergeMethod::concatenate, Downsample::dense_bottleneck};
  c.co.assembly.input_shape = {512, 1, 1};
  c.co.assembly.output_units = 512;
  c.evaluator = surrogate(4.0);
  return c;
}

EvolutionConfig surrogate_demo() {
  EvolutionConfig c;
  c.preset = "surrogate-demo";
  c.mode = RunMode::codeepneat;
  c.space = surrogate_demo_space();
  c.generations = 30;
  c.co.blueprints = sized(30);
  c.co.modules = sized(30);
  c.co.assembly_count = 60;
  c.co.blueprint_rates.add_node = 0.2;
  c.co.module_rates.add_node = 0.1;
  c.co.assembly.policy = {MergeMethod::concatenate, Downsample::dense_bottleneck};
  c.co.assembly.input_shape = {16, 1, 1};
  c.co.assembly.output_units = 2;
  c.evaluator = surrogate(6.0,
                          {
                              {"layer_size", ParamTarget::Scope::node, 192.0, 64.0},
                              {"dropout_rate", ParamTarget::Scope::node, 0.2, 0.2},
                              {"learning_rate", ParamTarget::Scope::global, 0.05, 0.05},
                          },
                          0.5, 1.0);
  return c;
}

EvolutionConfig dense_demo() {
  EvolutionConfig c;
  c.preset = "dense-demo";
  c.mode = RunMode::deepneat;
  c.space = dense_demo_space();
  c.generations = 20;
  c.population = sized(20);
  c.co.budget.epochs = 5;
  c.co.assembly.policy = {MergeMethod::concatenate, Downsample::dense_bottleneck};
  c.co.assembly.input_shape = {2, 1, 1};
  c.co.assembly.output_units = 2;
  c.evaluator = TrainerEvaluator(TaskKind::two_gaussians, 400, 1).describe();
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"captioning", "cifar10", "dense-demo", "lstm-ptb", "surrogate-demo"};
}

json preset_tree(const std::string& name) {
  EvolutionConfig c;
  if (name == "cifar10")
    c = cifar10();
  else if (name == "lstm-ptb")
    c = lstm_ptb();
  else if (name == "captioning")
    c = captioning();
  else if (name == "surrogate-demo")
    c = surrogate_demo();
  else if (name == "dense-demo")
    c = dense_demo();
  else
    throw ConfigError("preset", "unknown preset '" + name + "'");
  json tree = config_to_json(c);
  tree.erase("seed");
  tree.erase("output_dir");
  return tree;
}

}  // namespace codeepneat
