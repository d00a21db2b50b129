#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "otafl/errors.hpp"
#include "otafl/config.hpp"
#include "otafl/rng.hpp"

namespace otafl {

// Flat real model vector of length D.
using ModelParams = std::vector<double>;
using GradientVector = std::vector<double>;

// Row-major sample matrix pair: inputs n x in_dim, targets n x out_dim.
struct Dataset {
  std::size_t n = 0;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> inputs;
  std::vector<double> targets;

  const double* input_row(std::size_t k) const { return inputs.data() + k * in_dim; }
  const double* target_row(std::size_t k) const { return targets.data() + k * out_dim; }
};

struct WorkerProfile {
  int id = 0;                    // 1-based index
  std::int64_t sample_count = 0; // K_i
  double max_power_mw = 0.0;     // P_i^Max
  Dataset data;
};

// Task family plus the layout of the flat parameter vector.
//
// linear_regression: yhat = w[0]*x + w[1], squared-error sample loss. The
// two-layer single-neuron chain is affinely equivalent to this 2-parameter
// model, which is what the ground truth y = -2x + 1 is fit against.
//
// mlp_classifier: 784-64-10 with ReLU hidden layer and softmax output,
// cross-entropy sample loss. Layout: W1 (64x784 row-major), b1 (64),
// W2 (10x64 row-major), b2 (10); total 50890.
struct TaskModel {
  TaskKind kind = TaskKind::linear_regression;

  static constexpr int kMlpIn = 784;
  static constexpr int kMlpHidden = 64;
  static constexpr int kMlpOut = 10;
  static constexpr int kW1 = 0;
  static constexpr int kB1 = kMlpHidden * kMlpIn;          // 50176
  static constexpr int kW2 = kB1 + kMlpHidden;             // 50240
  static constexpr int kB2 = kW2 + kMlpOut * kMlpHidden;   // 50880
  static constexpr int kMlpDim = kB2 + kMlpOut;            // 50890

  static TaskModel linear_regression() { return {TaskKind::linear_regression}; }
  static TaskModel mlp() { return {TaskKind::mlp_classifier}; }
  static TaskModel for_kind(TaskKind k) { return {k}; }

  int dim() const { return kind == TaskKind::linear_regression ? 2 : kMlpDim; }
  std::size_t input_dim() const { return kind == TaskKind::linear_regression ? 1 : kMlpIn; }
  std::size_t output_dim() const { return kind == TaskKind::linear_regression ? 1 : kMlpOut; }
};

namespace detail {

inline void check_shapes(const ModelParams& model, const TaskModel& task,
                         const Dataset& data) {
  if (static_cast<int>(model.size()) != task.dim())
    throw ShapeError("model length does not match task layout");
  if (data.in_dim != task.input_dim() || data.out_dim != task.output_dim())
    throw ShapeError("dataset dims do not match task");
  if (data.inputs.size() != data.n * data.in_dim ||
      data.targets.size() != data.n * data.out_dim)
    throw ShapeError("dataset storage inconsistent with n");
  if (data.n == 0) throw ShapeError("empty dataset");
}

// Softmax with max-subtraction; returns log-sum-exp so callers can form
// log-probabilities without re-exponentiating.
inline double stable_softmax(std::span<const double> logits,
                             std::span<double> probs) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - m);
    sum += probs[c];
  }
  for (auto& p : probs) p /= sum;
  return m + std::log(sum);
}

// One forward pass of the 784-64-10 net. Buffers must be presized.
struct MlpScratch {
  std::vector<double> z1, h, logits, probs, dlogits, dh;
  void resize() {
    z1.assign(TaskModel::kMlpHidden, 0.0);
    h.assign(TaskModel::kMlpHidden, 0.0);
    logits.assign(TaskModel::kMlpOut, 0.0);
    probs.assign(TaskModel::kMlpOut, 0.0);
    dlogits.assign(TaskModel::kMlpOut, 0.0);
    dh.assign(TaskModel::kMlpHidden, 0.0);
  }
};

inline void mlp_forward(const ModelParams& w, const double* x, MlpScratch& s) {
  constexpr int I = TaskModel::kMlpIn;
  constexpr int H = TaskModel::kMlpHidden;
  constexpr int O = TaskModel::kMlpOut;
  const double* W1 = w.data() + TaskModel::kW1;
  const double* b1 = w.data() + TaskModel::kB1;
  const double* W2 = w.data() + TaskModel::kW2;
  const double* b2 = w.data() + TaskModel::kB2;
  for (int j = 0; j < H; ++j) {
    const double* row = W1 + j * I;
    double acc = b1[j];
    for (int i = 0; i < I; ++i) acc += row[i] * x[i];
    s.z1[j] = acc;
    s.h[j] = acc > 0.0 ? acc : 0.0;  // ReLU; derivative at 0 taken as 0
  }
  for (int c = 0; c < O; ++c) {
    const double* row = W2 + c * H;
    double acc = b2[c];
    for (int j = 0; j < H; ++j) acc += row[j] * s.h[j];
    s.logits[c] = acc;
  }
}

// Cross-entropy of one sample against a one-hot (or soft) target row.
inline double mlp_sample_loss(const double* y, MlpScratch& s) {
  const double lse = stable_softmax(s.logits, s.probs);
  double loss = 0.0;
  for (int c = 0; c < TaskModel::kMlpOut; ++c) {
    if (y[c] != 0.0) loss -= y[c] * (s.logits[c] - lse);
  }
  return loss;
}

}  // namespace detail

// Mean sample loss over the dataset: squared error for regression,
// softmax cross-entropy for the classifier.
inline double local_loss(const ModelParams& model, const TaskModel& task,
                         const Dataset& data) {
  detail::check_shapes(model, task, data);
  if (task.kind == TaskKind::linear_regression) {
    const double a = model[0], c = model[1];
    double acc = 0.0;
    for (std::size_t k = 0; k < data.n; ++k) {
      const double r = a * data.inputs[k] + c - data.targets[k];
      acc += r * r;
    }
    return acc / static_cast<double>(data.n);
  }
  detail::MlpScratch s;
  s.resize();
  double acc = 0.0;
  for (std::size_t k = 0; k < data.n; ++k) {
    detail::mlp_forward(model, data.input_row(k), s);
    acc += detail::mlp_sample_loss(data.target_row(k), s);
  }
  return acc / static_cast<double>(data.n);
}

// Exact full-batch gradient of local_loss at `model`.
inline GradientVector local_gradient(const ModelParams& model,
                                     const TaskModel& task,
                                     const Dataset& data) {
  detail::check_shapes(model, task, data);
  GradientVector g(model.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(data.n);
  if (task.kind == TaskKind::linear_regression) {
    for (std::size_t k = 0; k < data.n; ++k) {
      const double x = data.inputs[k];
      const double r = model[0] * x + model[1] - data.targets[k];
      g[0] += 2.0 * r * x;
      g[1] += 2.0 * r;
    }
    g[0] *= inv_n;
    g[1] *= inv_n;
    return g;
  }
  constexpr int I = TaskModel::kMlpIn;
  constexpr int H = TaskModel::kMlpHidden;
  constexpr int O = TaskModel::kMlpOut;
  detail::MlpScratch s;
  s.resize();
  double* gW1 = g.data() + TaskModel::kW1;
  double* gb1 = g.data() + TaskModel::kB1;
  double* gW2 = g.data() + TaskModel::kW2;
  double* gb2 = g.data() + TaskModel::kB2;
  const double* W2 = model.data() + TaskModel::kW2;
  for (std::size_t k = 0; k < data.n; ++k) {
    const double* x = data.input_row(k);
    const double* y = data.target_row(k);
    detail::mlp_forward(model, x, s);
    detail::stable_softmax(s.logits, s.probs);
    for (int c = 0; c < O; ++c) s.dlogits[c] = s.probs[c] - y[c];
    for (int j = 0; j < H; ++j) s.dh[j] = 0.0;
    for (int c = 0; c < O; ++c) {
      const double d = s.dlogits[c];
      double* grow = gW2 + c * H;
      const double* wrow = W2 + c * H;
      for (int j = 0; j < H; ++j) {
        grow[j] += d * s.h[j];
        s.dh[j] += d * wrow[j];
      }
      gb2[c] += d;
    }
    for (int j = 0; j < H; ++j) {
      if (s.z1[j] <= 0.0) continue;  // ReLU'(z<=0) = 0
      const double d = s.dh[j];
      double* grow = gW1 + j * I;
      for (int i = 0; i < I; ++i) grow[i] += d * x[i];
      gb1[j] += d;
    }
  }
  for (auto& v : g) v *= inv_n;
  return g;
}

// One local gradient-descent step: w_i = w - alpha * grad F_i(w).
inline ModelParams local_update(const ModelParams& global,
                                const TaskModel& task, const Dataset& data,
                                double alpha) {
  if (alpha <= 0.0) throw ConfigError("learning rate must be positive");
  const GradientVector g = local_gradient(global, task, data);
  ModelParams out(global.size());
  for (std::size_t d = 0; d < global.size(); ++d)
    out[d] = global[d] - alpha * g[d];
  return out;
}

// Error-free sample-weighted average of local models: sum K_i w_i / K.
inline ModelParams ideal_global_aggregate(
    std::span<const ModelParams> locals, std::span<const std::int64_t> weights) {
  if (locals.empty() || locals.size() != weights.size())
    throw AggregationError("aggregation needs a nonempty matched worker list");
  const std::size_t dim = locals[0].size();
  double total = 0.0;
  ModelParams out(dim, 0.0);
  for (std::size_t i = 0; i < locals.size(); ++i) {
    if (locals[i].size() != dim)
      throw ShapeError("local model length mismatch in aggregation");
    const double w = static_cast<double>(weights[i]);
    total += w;
    for (std::size_t d = 0; d < dim; ++d) out[d] += w * locals[i][d];
  }
  for (auto& v : out) v /= total;
  return out;
}

// Fraction of samples whose argmax class matches the target.
inline double classification_accuracy(const ModelParams& model,
                                      const TaskModel& task,
                                      const Dataset& data) {
  if (task.kind != TaskKind::mlp_classifier)
    throw ConfigError("accuracy is defined for the classifier task");
  detail::check_shapes(model, task, data);
  detail::MlpScratch s;
  s.resize();
  std::size_t hits = 0;
  for (std::size_t k = 0; k < data.n; ++k) {
    detail::mlp_forward(model, data.input_row(k), s);
    const auto pred = static_cast<std::size_t>(
        std::max_element(s.logits.begin(), s.logits.end()) - s.logits.begin());
    const double* y = data.target_row(k);
    const auto truth = static_cast<std::size_t>(
        std::max_element(y, y + data.out_dim) - y);
    if (pred == truth) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.n);
}

// Bounded symmetric init for the classifier: weights uniform in
// +-sqrt(6/(fan_in+fan_out)), biases zero. Regression starts at the origin.
inline ModelParams init_model(const TaskModel& task, Rng& rng) {
  ModelParams w(static_cast<std::size_t>(task.dim()), 0.0);
  if (task.kind == TaskKind::linear_regression) return w;
  const double s1 = std::sqrt(6.0 / (TaskModel::kMlpIn + TaskModel::kMlpHidden));
  const double s2 = std::sqrt(6.0 / (TaskModel::kMlpHidden + TaskModel::kMlpOut));
  for (int i = TaskModel::kW1; i < TaskModel::kB1; ++i) w[i] = rng.uniform(-s1, s1);
  for (int i = TaskModel::kW2; i < TaskModel::kB2; ++i) w[i] = rng.uniform(-s2, s2);
  return w;
}

// Closed-form least squares for the 2-parameter regression task.
struct LeastSquaresFit {
  ModelParams params;  // (slope, intercept)
  double loss = 0.0;   // mean squared residual at the optimum
};

inline LeastSquaresFit least_squares_fit(const Dataset& data) {
  if (data.in_dim != 1 || data.out_dim != 1 || data.n == 0)
    throw ShapeError("least squares expects nonempty 1-d regression data");
  double sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (std::size_t k = 0; k < data.n; ++k) {
    const double x = data.inputs[k], y = data.targets[k];
    sx += x; sxx += x * x; sy += y; sxy += x * y;
  }
  const double n = static_cast<double>(data.n);
  const double det = sxx * n - sx * sx;
  if (det == 0.0) throw ShapeError("degenerate design matrix");
  LeastSquaresFit fit;
  fit.params = {(sxy * n - sx * sy) / det, (sxx * sy - sx * sxy) / det};
  TaskModel task = TaskModel::linear_regression();
  fit.loss = local_loss(fit.params, task, data);
  return fit;
}

// Extreme eigenvalues of the (constant) Hessian of the regression loss,
// i.e. certified smoothness and strong-convexity constants for that task.
struct CurvatureBounds {
  double lipschitz = 0.0;        // largest eigenvalue
  double strong_convexity = 0.0; // smallest eigenvalue
};

inline CurvatureBounds regression_curvature_bounds(const Dataset& data) {
  if (data.in_dim != 1 || data.out_dim != 1 || data.n == 0)
    throw ShapeError("curvature bounds expect nonempty 1-d regression data");
  double sx = 0, sxx = 0;
  for (std::size_t k = 0; k < data.n; ++k) {
    sx += data.inputs[k];
    sxx += data.inputs[k] * data.inputs[k];
  }
  const double n = static_cast<double>(data.n);
  // Hessian = (2/n) [[sxx, sx], [sx, n]]
  const double a = 2.0 * sxx / n, b = 2.0 * sx / n, d = 2.0;
  const double mean = 0.5 * (a + d);
  const double disc = std::sqrt(std::max(0.0, mean * mean - (a * d - b * b)));
  return {mean + disc, mean - disc};
}

// Largest per-sample gradient squared norm at `model`; the quantity the
// bounded-local-gradients constants are measured from.
inline double max_sample_gradient_norm2(const ModelParams& model,
                                        const TaskModel& task,
                                        const Dataset& data) {
  detail::check_shapes(model, task, data);
  double worst = 0.0;
  if (task.kind == TaskKind::linear_regression) {
    for (std::size_t k = 0; k < data.n; ++k) {
      const double x = data.inputs[k];
      const double r = model[0] * x + model[1] - data.targets[k];
      worst = std::max(worst, 4.0 * r * r * (x * x + 1.0));
    }
    return worst;
  }
  Dataset one;
  one.n = 1;
  one.in_dim = data.in_dim;
  one.out_dim = data.out_dim;
  for (std::size_t k = 0; k < data.n; ++k) {
    one.inputs.assign(data.input_row(k), data.input_row(k) + data.in_dim);
    one.targets.assign(data.target_row(k), data.target_row(k) + data.out_dim);
    const auto g = local_gradient(model, task, one);
    double norm2 = 0.0;
    for (double v : g) norm2 += v * v;
    worst = std::max(worst, norm2);
  }
  return worst;
}

inline double squared_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

}  // namespace otafl
