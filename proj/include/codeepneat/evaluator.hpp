#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "codeepneat/assembly.hpp"

namespace codeepneat {

struct EvaluationBudget {
  int epochs = 1;
  std::size_t sample_cap = 0;  // 0 = use every training sample
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument when epochs < 1
};

struct FitnessReport {
  std::uint64_t network_id = 0;
  double fitness = 0.0;
  json diagnostics = json::object();
  bool failed = false;  // evaluation error; fitness holds the floor
};

json to_json(const FitnessReport& report);
FitnessReport fitness_report_from_json(const json& j);

// Raised when a network contains a layer kind the evaluator cannot run.
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  // Higher is better; must be finite. Must be safe to call concurrently.
  virtual FitnessReport evaluate(const AssembledNetwork& net, const EvaluationBudget& budget) const = 0;
  virtual bool deterministic() const = 0;
  // Layer kinds this evaluator accepts.
  virtual std::set<std::string> capabilities() const = 0;
  // Serializable description; make_evaluator(describe()) rebuilds an
  // equivalent evaluator (used to configure remote workers).
  virtual json describe() const = 0;
};

using EvaluatorPtr = std::shared_ptr<const Evaluator>;

// --- structural surrogate ---------------------------------------------------

struct ParamTarget {
  enum class Scope { node, global };
  std::string name;
  Scope scope = Scope::node;
  double value = 0.0;
  double scale = 1.0;  // error is ((actual - value) / scale)^2
};

struct StructuralTarget {
  double depth = 6.0;
  double depth_weight = 1.0;
  double param_weight = 1.0;
  std::vector<ParamTarget> params;
};

json to_json(const StructuralTarget& target);
StructuralTarget structural_target_from_json(const json& j);

// Longest input->output path counted in dense, conv and lstm layers.
int compute_depth(const AssembledNetwork& net);

// exp(-(w_d (depth - d*)^2 + w_p * sum of per-parameter errors)). Node-scope
// errors are averaged over the layers carrying the parameter; a parameter
// missing from the network contributes 1.
FitnessReport surrogate_fitness(const AssembledNetwork& net, const StructuralTarget& target);

class SurrogateEvaluator final : public Evaluator {
 public:
  explicit SurrogateEvaluator(StructuralTarget target) : target_(std::move(target)) {}
  FitnessReport evaluate(const AssembledNetwork& net, const EvaluationBudget& budget) const override;
  bool deterministic() const override { return true; }
  std::set<std::string> capabilities() const override;
  json describe() const override;
  const StructuralTarget& target() const { return target_; }

 private:
  StructuralTarget target_;
};

// --- synthetic tasks ----------------------------------------------------------

enum class TaskKind { two_gaussians, xor_grid, spirals };
std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view s);

struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> x;  // row-major
  std::vector<int> y;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SyntheticTask {
  TaskKind kind = TaskKind::two_gaussians;
  std::size_t classes = 2;
  Dataset train;
  Dataset validation;

  std::size_t features() const { return train.cols; }
  friend bool operator==(const SyntheticTask&, const SyntheticTask&) = default;
};

// Balanced classes, shuffled, 85/15 train/validation split. n >= 40.
SyntheticTask synthetic_task(TaskKind kind, std::size_t n, std::uint64_t seed);

// --- reference trainer ----------------------------------------------------------

// Mini-batch SGD with (optionally Nesterov) momentum on softmax cross-entropy.
// Supports input, dense, bottleneck (flat), merge and output layers. Globals
// read: learning_rate, momentum, nesterov, weight_initialization
// (glorot_normal | he_normal), batch_size. Node params read: layer_size,
// layer_activation (relu | linear), dropout_rate / layer_dropout,
// initial_weight_scaling.
struct TrainResult {
  double validation_accuracy = 0.0;
  std::vector<double> train_loss;  // mean loss per epoch
  std::size_t parameter_count = 0;
  bool diverged = false;
};

TrainResult train_network(const AssembledNetwork& net, const SyntheticTask& task,
                          const EvaluationBudget& budget);

class TrainerEvaluator final : public Evaluator {
 public:
  TrainerEvaluator(TaskKind kind, std::size_t samples, std::uint64_t task_seed);
  FitnessReport evaluate(const AssembledNetwork& net, const EvaluationBudget& budget) const override;
  bool deterministic() const override { return true; }
  std::set<std::string> capabilities() const override;
  json describe() const override;
  const SyntheticTask& task() const { return task_; }

 private:
  std::size_t samples_;
  std::uint64_t task_seed_;
  SyntheticTask task_;
};

struct GradientCheckOptions {
  double perturbation = 1e-5;
  std::size_t batch = 16;
  std::uint64_t seed = 0;
  bool zero_weights = false;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::vector<double> analytic;
  std::vector<double> numeric;
  // First parameter index and (rows, cols) of each weighted layer's matrix;
  // the bias vector follows the matrix.
  struct Block {
    int layer;
    std::size_t offset;
    std::size_t rows;
    std::size_t cols;
  };
  std::vector<Block> blocks;
};

// Backprop gradient of the mean training loss vs. central differences.
GradientCheckResult gradient_check(const AssembledNetwork& net, const SyntheticTask& task,
                                   const GradientCheckOptions& options);

// Rebuilds an evaluator from describe() output.
EvaluatorPtr make_evaluator(const json& description);

// --- evaluation backends ----------------------------------------------------------

struct EvalRequest {
  AssembledNetwork network;
  EvaluationBudget budget;
};

// Resolves a whole generation: one report per request, in request order.
// Evaluation failures become reports with failed = true and the floor fitness.
class EvaluationBackend {
 public:
  virtual ~EvaluationBackend() = default;
  virtual std::vector<FitnessReport> evaluate_all(const std::vector<EvalRequest>& requests) = 0;
};

// Runs the evaluator (or a failure report) for one request; never throws.
FitnessReport evaluate_safely(const Evaluator& evaluator, const EvalRequest& request, double floor);

class InProcessBackend final : public EvaluationBackend {
 public:
  explicit InProcessBackend(EvaluatorPtr evaluator, double floor = 0.0)
      : evaluator_(std::move(evaluator)), floor_(floor) {}
  std::vector<FitnessReport> evaluate_all(const std::vector<EvalRequest>& requests) override;

 private:
  EvaluatorPtr evaluator_;
  double floor_;
};

}  // namespace codeepneat
