#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "codeepneat/evaluator.hpp"

namespace codeepneat {

namespace {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct PlannedLayer {
  int id = 0;
  std::string kind;
  std::vector<int> parents;
  Eigen::Index width = 0;
  Eigen::Index fan_in = 0;
  bool relu = false;
  double dropout = 0.0;
  double init_scale = 1.0;
  MergeMethod merge = MergeMethod::concatenate;
  int weights = -1;  // index into Model::w
};

bool has_weights(const std::string& kind) {
  return kind == kinds::dense || kind == kinds::bottleneck || kind == kinds::output;
}

double number_or(const ParamMap& params, std::initializer_list<const char*> names, double fallback) {
  for (const auto* n : names) {
    auto it = params.find(n);
    if (it != params.end()) return as_number(it->second);
  }
  return fallback;
}

std::string string_or(const ParamMap& params, const char* name, std::string fallback) {
  auto it = params.find(name);
  return it == params.end() ? fallback : to_string(it->second);
}

struct Model {
  std::vector<PlannedLayer> plan;
  std::vector<Matrix> w;
  std::vector<RowVector> b;
  std::size_t classes = 2;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < w.size(); ++i) n += static_cast<std::size_t>(w[i].size() + b[i].size());
    return n;
  }
};

Model build_model(const AssembledNetwork& net, const SyntheticTask& task) {
  const std::set<std::string> supported{kinds::input, kinds::output, kinds::dense, kinds::bottleneck,
                                        kinds::merge};
  Model m;
  m.classes = task.classes;
  for (const auto& l : net.layers) {
    if (!supported.count(l.kind))
      throw CapabilityError("reference trainer cannot run layer kind '" + l.kind + "' (layer " +
                            std::to_string(l.id) + ")");
    if (l.kind == kinds::bottleneck && l.output_shape.spatial())
      throw CapabilityError("reference trainer cannot run spatial bottleneck layers");
    PlannedLayer p;
    p.id = l.id;
    p.kind = l.kind;
    p.parents = net.parents(l.id);
    p.width = static_cast<Eigen::Index>(l.output_shape.total());
    if (l.kind == kinds::input && static_cast<std::size_t>(p.width) != task.features())
      throw std::invalid_argument("network input width does not match the task features");
    if (l.kind == kinds::output && static_cast<std::size_t>(p.width) != task.classes)
      throw std::invalid_argument("network output width does not match the task classes");
    if (l.kind == kinds::merge)
      p.merge = merge_method_from_string(string_or(l.params, "method", "concatenate"));
    if (l.kind == kinds::dense) {
      p.relu = string_or(l.params, "layer_activation", "relu") == "relu";
      p.dropout = std::clamp(number_or(l.params, {"dropout_rate", "layer_dropout"}, 0.0), 0.0, 0.95);
    }
    p.init_scale = number_or(l.params, {"initial_weight_scaling"}, 1.0);
    if (has_weights(l.kind)) {
      p.fan_in = m.plan[static_cast<std::size_t>(p.parents.at(0))].width;
      p.weights = static_cast<int>(m.w.size());
      m.w.emplace_back(Matrix::Zero(p.fan_in, p.width));
      m.b.emplace_back(RowVector::Zero(p.width));
    }
    m.plan.push_back(std::move(p));
  }
  return m;
}

void initialize(Model& m, const ParamMap& globals, Rng& rng) {
  const bool he = string_or(globals, "weight_initialization", "glorot_normal") == "he_normal";
  for (const auto& p : m.plan) {
    if (p.weights < 0) continue;
    auto& w = m.w[static_cast<std::size_t>(p.weights)];
    const double fan_in = static_cast<double>(p.fan_in), fan_out = static_cast<double>(p.width);
    const double sigma = p.init_scale * (he ? std::sqrt(2.0 / fan_in) : std::sqrt(2.0 / (fan_in + fan_out)));
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.normal(0.0, sigma);
  }
}

struct Pass {
  std::vector<Matrix> out;   // post-activation output per layer
  std::vector<Matrix> mask;  // relu * dropout multiplier per dense layer
  std::vector<Matrix> pre;   // pre-activation of relu dense layers
};

// Forward pass; returns logits of the output layer. rng == nullptr disables dropout.
Matrix forward(const Model& m, const Matrix& x, Pass& pass, Rng* rng) {
  pass.out.assign(m.plan.size(), Matrix());
  pass.mask.assign(m.plan.size(), Matrix());
  pass.pre.assign(m.plan.size(), Matrix());
  Matrix logits;
  for (const auto& p : m.plan) {
    const auto i = static_cast<std::size_t>(p.id);
    if (p.kind == kinds::input) {
      pass.out[i] = x;
    } else if (p.kind == kinds::merge) {
      if (p.merge == MergeMethod::element_wise_sum) {
        Matrix sum = pass.out[static_cast<std::size_t>(p.parents[0])];
        for (std::size_t k = 1; k < p.parents.size(); ++k) sum += pass.out[static_cast<std::size_t>(p.parents[k])];
        pass.out[i] = std::move(sum);
      } else {
        Matrix cat(x.rows(), p.width);
        Eigen::Index col = 0;
        for (int parent : p.parents) {
          const auto& src = pass.out[static_cast<std::size_t>(parent)];
          cat.middleCols(col, src.cols()) = src;
          col += src.cols();
        }
        pass.out[i] = std::move(cat);
      }
    } else {
      const auto wi = static_cast<std::size_t>(p.weights);
      Matrix z = pass.out[static_cast<std::size_t>(p.parents[0])] * m.w[wi];
      z.rowwise() += m.b[wi];
      if (p.kind == kinds::dense) {
        Matrix mask = p.relu ? Matrix((z.array() > 0.0).cast<double>()) : Matrix::Ones(z.rows(), z.cols());
        if (rng != nullptr && p.dropout > 0.0) {
          const double keep = 1.0 - p.dropout;
          for (Eigen::Index c = 0; c < mask.cols(); ++c)
            for (Eigen::Index r = 0; r < mask.rows(); ++r)
              mask(r, c) *= rng->bernoulli(keep) ? 1.0 / keep : 0.0;
        }
        pass.out[i] = z.cwiseProduct(mask);
        pass.mask[i] = std::move(mask);
        if (p.relu) pass.pre[i] = z;
      } else {
        pass.out[i] = std::move(z);
      }
      if (p.kind == kinds::output) logits = pass.out[i];
    }
  }
  return logits;
}

// Row-wise softmax probabilities and mean cross-entropy.
double softmax_loss(const Matrix& logits, const std::vector<int>& labels, Matrix& probs) {
  probs.resize(logits.rows(), logits.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    RowVector e = (logits.row(r).array() - top).exp().matrix();
    const double z = e.sum();
    probs.row(r) = e / z;
    loss += -(logits(r, labels[static_cast<std::size_t>(r)]) - top - std::log(z));
  }
  return loss / static_cast<double>(logits.rows());
}

struct Gradients {
  std::vector<Matrix> w;
  std::vector<RowVector> b;
};

double backward(const Model& m, const Matrix& x, const std::vector<int>& labels, Rng* rng,
                Gradients& g) {
  Pass pass;
  const Matrix logits = forward(m, x, pass, rng);
  Matrix probs;
  const double loss = softmax_loss(logits, labels, probs);

  std::vector<Matrix> grad(m.plan.size());
  const auto batch = static_cast<double>(x.rows());
  g.w.resize(m.w.size());
  g.b.resize(m.b.size());
  for (auto it = m.plan.rbegin(); it != m.plan.rend(); ++it) {
    const auto& p = *it;
    const auto i = static_cast<std::size_t>(p.id);
    if (p.kind == kinds::input) continue;
    Matrix upstream;
    if (p.kind == kinds::output) {
      upstream = probs;
      for (Eigen::Index r = 0; r < upstream.rows(); ++r) upstream(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
      upstream /= batch;
    } else {
      upstream = grad[i].size() > 0 ? grad[i] : Matrix::Zero(x.rows(), p.width);
    }
    const auto add_to = [&](int parent, const Matrix& d) {
      auto& target = grad[static_cast<std::size_t>(parent)];
      if (target.size() == 0)
        target = d;
      else
        target += d;
    };
    if (p.kind == kinds::merge) {
      if (p.merge == MergeMethod::element_wise_sum) {
        for (int parent : p.parents) add_to(parent, upstream);
      } else {
        Eigen::Index col = 0;
        for (int parent : p.parents) {
          const auto cols = m.plan[static_cast<std::size_t>(parent)].width;
          add_to(parent, upstream.middleCols(col, cols));
          col += cols;
        }
      }
      continue;
    }
    Matrix dz = p.kind == kinds::dense ? Matrix(upstream.cwiseProduct(pass.mask[i])) : upstream;
    const auto wi = static_cast<std::size_t>(p.weights);
    const auto& input = pass.out[static_cast<std::size_t>(p.parents[0])];
    g.w[wi] = input.transpose() * dz;
    g.b[wi] = dz.colwise().sum();
    add_to(p.parents[0], dz * m.w[wi].transpose());
  }
  return loss;
}

Matrix rows_of(const Dataset& d, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
               std::vector<int>& labels) {
  Matrix x(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(d.cols));
  labels.clear();
  for (std::size_t k = begin; k < end; ++k) {
    const auto r = idx[k];
    for (std::size_t c = 0; c < d.cols; ++c)
      x(static_cast<Eigen::Index>(k - begin), static_cast<Eigen::Index>(c)) = d.x[r * d.cols + c];
    labels.push_back(d.y[r]);
  }
  return x;
}

bool all_finite(const Model& m) {
  for (std::size_t i = 0; i < m.w.size(); ++i)
    if (!m.w[i].allFinite() || !m.b[i].allFinite()) return false;
  return true;
}

double accuracy(const Model& m, const Dataset& d) {
  if (d.rows == 0) return 0.0;
  std::vector<std::size_t> idx(d.rows);
  for (std::size_t i = 0; i < d.rows; ++i) idx[i] = i;
  std::vector<int> labels;
  const Matrix x = rows_of(d, idx, 0, d.rows, labels);
  Pass pass;
  const Matrix logits = forward(m, x, pass, nullptr);
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    correct += static_cast<int>(best) == labels[static_cast<std::size_t>(r)];
  }
  return static_cast<double>(correct) / static_cast<double>(d.rows);
}

}  // namespace

TrainResult train_network(const AssembledNetwork& net, const SyntheticTask& task,
                          const EvaluationBudget& budget) {
  budget.validate();
  Model m = build_model(net, task);
  Rng rng(budget.seed);
  initialize(m, net.globals, rng);

  const double lr = number_or(net.globals, {"learning_rate"}, 0.01);
  const double mu = number_or(net.globals, {"momentum"}, 0.9);
  const bool nesterov = number_or(net.globals, {"nesterov"}, 0.0) != 0.0;
  const auto batch = static_cast<std::size_t>(std::max(1.0, number_or(net.globals, {"batch_size"}, 32.0)));

  std::vector<Matrix> vw;
  std::vector<RowVector> vb;
  for (std::size_t i = 0; i < m.w.size(); ++i) {
    vw.push_back(Matrix::Zero(m.w[i].rows(), m.w[i].cols()));
    vb.push_back(RowVector::Zero(m.b[i].size()));
  }

  std::size_t n = task.train.rows;
  if (budget.sample_cap > 0) n = std::min(n, budget.sample_cap);
  std::vector<std::size_t> order(task.train.rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  result.parameter_count = m.parameter_count();
  std::vector<int> labels;
  Gradients g;
  for (int epoch = 0; epoch < budget.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const auto end = std::min(n, start + batch);
      const Matrix x = rows_of(task.train, order, start, end, labels);
      const double loss = backward(m, x, labels, &rng, g);
      total += loss * static_cast<double>(end - start);
      for (std::size_t k = 0; k < m.w.size(); ++k) {
        vw[k] = mu * vw[k] - lr * g.w[k];
        vb[k] = mu * vb[k] - lr * g.b[k];
        if (nesterov) {
          m.w[k] += mu * vw[k] - lr * g.w[k];
          m.b[k] += mu * vb[k] - lr * g.b[k];
        } else {
          m.w[k] += vw[k];
          m.b[k] += vb[k];
        }
      }
    }
    const double mean = total / static_cast<double>(std::max<std::size_t>(n, 1));
    result.train_loss.push_back(mean);
    if (!std::isfinite(mean) || !all_finite(m)) {
      result.diverged = true;
      result.validation_accuracy = 0.0;
      return result;
    }
  }
  result.validation_accuracy = accuracy(m, task.validation);
  return result;
}

TrainerEvaluator::TrainerEvaluator(TaskKind kind, std::size_t samples, std::uint64_t task_seed)
    : samples_(samples), task_seed_(task_seed), task_(synthetic_task(kind, samples, task_seed)) {}

FitnessReport TrainerEvaluator::evaluate(const AssembledNetwork& net,
                                         const EvaluationBudget& budget) const {
  const auto result = train_network(net, task_, budget);
  FitnessReport r;
  r.network_id = net.provenance.network_id;
  r.fitness = result.diverged ? 0.0 : result.validation_accuracy;
  r.diagnostics = {{"train_loss", result.train_loss},
                   {"parameter_count", result.parameter_count},
                   {"diverged", result.diverged}};
  // JSON cannot hold non-finite losses.
  for (auto& v : r.diagnostics["train_loss"])
    if (!std::isfinite(v.get<double>())) v = nullptr;
  return r;
}

std::set<std::string> TrainerEvaluator::capabilities() const {
  return {kinds::input, kinds::output, kinds::dense, kinds::bottleneck, kinds::merge};
}

json TrainerEvaluator::describe() const {
  return {{"kind", "trainer"},
          {"task", std::string(to_string(task_.kind))},
          {"samples", samples_},
          {"seed", task_seed_}};
}

GradientCheckResult gradient_check(const AssembledNetwork& net, const SyntheticTask& task,
                                   const GradientCheckOptions& options) {
  Model m = build_model(net, task);
  Rng rng(options.seed);
  if (!options.zero_weights) {
    initialize(m, net.globals, rng);
    // Zero biases behind a dead relu layer put every unit exactly on the
    // kink, where backprop and central differences legitimately disagree.
    for (auto& b : m.b)
      for (Eigen::Index c = 0; c < b.size(); ++c) b(c) = rng.normal(0.0, 0.1);
  }

  // Probe on rows whose relu pre-activations stay clear of zero, so that no
  // perturbation crosses a kink. Falls back to the first rows if too few.
  std::vector<std::size_t> all(task.train.rows);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<int> labels;
  std::vector<std::size_t> idx;
  {
    Pass pass;
    forward(m, rows_of(task.train, all, 0, all.size(), labels), pass, nullptr);
    constexpr double kMargin = 1e-3;
    for (std::size_t r = 0; r < all.size() && idx.size() < options.batch; ++r) {
      bool smooth = true;
      for (const auto& z : pass.pre)
        if (z.size() > 0 && z.row(static_cast<Eigen::Index>(r)).cwiseAbs().minCoeff() < kMargin) smooth = false;
      if (smooth) idx.push_back(r);
    }
  }
  if (idx.size() < std::min(options.batch, all.size())) idx = all;
  const std::size_t n = std::min(options.batch, idx.size());
  const Matrix x = rows_of(task.train, idx, 0, n, labels);

  Gradients g;
  backward(m, x, labels, nullptr, g);

  const auto loss_at = [&]() {
    Pass pass;
    Matrix probs;
    return softmax_loss(forward(m, x, pass, nullptr), labels, probs);
  };

  GradientCheckResult result;
  const double eps = options.perturbation;
  const auto probe = [&](double& theta, double analytic) {
    const double saved = theta;
    theta = saved + eps;
    const double up = loss_at();
    theta = saved - eps;
    const double down = loss_at();
    theta = saved;
    const double numeric = (up - down) / (2.0 * eps);
    result.analytic.push_back(analytic);
    result.numeric.push_back(numeric);
    const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
    result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
  };

  for (const auto& p : m.plan) {
    if (p.weights < 0) continue;
    const auto wi = static_cast<std::size_t>(p.weights);
    result.blocks.push_back({p.id, result.analytic.size(), static_cast<std::size_t>(m.w[wi].rows()),
                             static_cast<std::size_t>(m.w[wi].cols())});
    for (Eigen::Index r = 0; r < m.w[wi].rows(); ++r)
      for (Eigen::Index c = 0; c < m.w[wi].cols(); ++c) probe(m.w[wi](r, c), g.w[wi](r, c));
    for (Eigen::Index c = 0; c < m.b[wi].size(); ++c) probe(m.b[wi](c), g.b[wi](c));
  }
  return result;
}

}  // namespace codeepneat
