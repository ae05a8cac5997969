#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/param_vector.hpp"
#include "fedsim/random.hpp"
#include "fedsim/synthetic_task.hpp"

namespace fedsim {

enum class Architecture { linear, one_hidden_layer };

inline std::string to_string(Architecture a) {
  return a == Architecture::linear ? "linear" : "one_hidden_layer";
}

inline Architecture parse_architecture(const std::string& s) {
  if (s == "linear") return Architecture::linear;
  if (s == "one_hidden_layer" || s == "mlp") return Architecture::one_hidden_layer;
  throw ConfigError("unknown architecture '" + s + "'");
}

// Softmax classifier used as the trainable model on each client.
//
//   linear:            logits = W x + b
//   one_hidden_layer:  logits = W2 tanh(W1 x + b1) + b2
//
// Parameters are laid out segment by segment in the order listed in layout().
class TaskModel {
 public:
  static TaskModel linear(std::size_t input_dim, std::size_t num_classes) {
    return TaskModel(Architecture::linear, input_dim, num_classes, 0);
  }
  static TaskModel one_hidden_layer(std::size_t input_dim, std::size_t hidden,
                                    std::size_t num_classes) {
    return TaskModel(Architecture::one_hidden_layer, input_dim, num_classes, hidden);
  }

  TaskModel(Architecture arch, std::size_t input_dim, std::size_t num_classes,
            std::size_t hidden_units)
      : arch_(arch), d_(input_dim), c_(num_classes), h_(hidden_units) {
    if (d_ == 0) throw ConfigError("input_dim must be positive");
    if (c_ < 2) throw ConfigError("num_classes must be at least 2");
    if (arch_ == Architecture::one_hidden_layer && h_ == 0)
      throw ConfigError("hidden layer needs at least one unit");
    if (arch_ == Architecture::linear) h_ = 0;
    ShapeManifest m;
    if (arch_ == Architecture::linear) {
      m = {{"weight", {c_, d_}}, {"bias", {c_}}};
    } else {
      m = {{"hidden.weight", {h_, d_}},
           {"hidden.bias", {h_}},
           {"output.weight", {c_, h_}},
           {"output.bias", {c_}}};
    }
    layout_ = std::make_shared<const ShapeManifest>(std::move(m));
  }

  Architecture architecture() const noexcept { return arch_; }
  std::size_t input_dim() const noexcept { return d_; }
  std::size_t num_classes() const noexcept { return c_; }
  std::size_t hidden_units() const noexcept { return h_; }
  const ShapeManifest& layout() const noexcept { return *layout_; }
  const std::shared_ptr<const ShapeManifest>& layout_ptr() const noexcept { return layout_; }
  std::size_t parameter_count() const { return manifest_size(*layout_); }

  // Weights ~ N(0, (scale/sqrt(fan_in))^2), biases zero.
  ParamVector initial_weights(std::uint64_t seed, double scale = 1.0) const {
    Rng rng(derive_seed({seed, 0x1417}));
    std::vector<double> w(parameter_count(), 0.0);
    std::size_t offset = 0;
    for (const auto& seg : *layout_) {
      if (seg.dims.size() == 2) {
        const double sd = scale / std::sqrt(static_cast<double>(seg.dims[1]));
        for (std::size_t i = 0; i < seg.size(); ++i) w[offset + i] = sd * rng.normal();
      }
      offset += seg.size();
    }
    return ParamVector(layout_, std::move(w));
  }

  ParamVector zero_weights() const {
    return ParamVector(layout_, std::vector<double>(parameter_count(), 0.0));
  }

  void require_layout(const ParamVector& w) const {
    if (!(layout_ == w.manifest_ptr() || *layout_ == w.manifest()))
      throw ShapeError("weights do not match the model layout");
  }

  // Scratch space for one forward/backward pass.
  struct Workspace {
    std::vector<double> hidden, logits, dlogits, dhidden;
  };

  Workspace workspace() const {
    return {std::vector<double>(h_), std::vector<double>(c_),
            std::vector<double>(c_), std::vector<double>(h_)};
  }

  // Fills ws.logits with the softmax probabilities of x.
  void forward(std::span<const double> w, std::span<const double> x, Workspace& ws) const {
    if (arch_ == Architecture::linear) {
      const double* W = w.data();
      const double* b = W + c_ * d_;
      for (std::size_t c = 0; c < c_; ++c)
        ws.logits[c] = b[c] + dot(W + c * d_, x.data(), d_);
    } else {
      const double* W1 = w.data();
      const double* b1 = W1 + h_ * d_;
      const double* W2 = b1 + h_;
      const double* b2 = W2 + c_ * h_;
      for (std::size_t j = 0; j < h_; ++j)
        ws.hidden[j] = std::tanh(b1[j] + dot(W1 + j * d_, x.data(), d_));
      for (std::size_t c = 0; c < c_; ++c)
        ws.logits[c] = b2[c] + dot(W2 + c * h_, ws.hidden.data(), h_);
    }
  }

  std::span<const double> probabilities(std::span<const double> w, std::span<const double> x,
                                        Workspace& ws) const {
    forward(w, x, ws);
    softmax_in_place(ws.logits);
    return ws.logits;
  }

  // Adds d(loss)/dw for one example to grad and returns its cross-entropy.
  double accumulate(std::span<const double> w, std::span<const double> x, int label,
                    std::span<double> grad, Workspace& ws) const {
    forward(w, x, ws);
    const auto y = static_cast<std::size_t>(label);
    const double mx = *std::max_element(ws.logits.begin(), ws.logits.end());
    double z = 0.0;
    for (double l : ws.logits) z += std::exp(l - mx);
    const double lse = mx + std::log(z);
    const double loss = lse - ws.logits[y];
    for (std::size_t c = 0; c < c_; ++c)
      ws.dlogits[c] = std::exp(ws.logits[c] - lse) - (c == y ? 1.0 : 0.0);

    if (arch_ == Architecture::linear) {
      double* gW = grad.data();
      double* gb = gW + c_ * d_;
      for (std::size_t c = 0; c < c_; ++c) {
        const double g = ws.dlogits[c];
        for (std::size_t j = 0; j < d_; ++j) gW[c * d_ + j] += g * x[j];
        gb[c] += g;
      }
    } else {
      const double* W2 = w.data() + h_ * d_ + h_;
      double* gW1 = grad.data();
      double* gb1 = gW1 + h_ * d_;
      double* gW2 = gb1 + h_;
      double* gb2 = gW2 + c_ * h_;
      std::fill(ws.dhidden.begin(), ws.dhidden.end(), 0.0);
      for (std::size_t c = 0; c < c_; ++c) {
        const double g = ws.dlogits[c];
        for (std::size_t j = 0; j < h_; ++j) {
          gW2[c * h_ + j] += g * ws.hidden[j];
          ws.dhidden[j] += g * W2[c * h_ + j];
        }
        gb2[c] += g;
      }
      for (std::size_t j = 0; j < h_; ++j) {
        const double dz = ws.dhidden[j] * (1.0 - ws.hidden[j] * ws.hidden[j]);
        for (std::size_t i = 0; i < d_; ++i) gW1[j * d_ + i] += dz * x[i];
        gb1[j] += dz;
      }
    }
    return loss;
  }

  // Highest-scoring class; ties go to the lowest index.
  std::size_t predict(std::span<const double> w, std::span<const double> x, Workspace& ws) const {
    forward(w, x, ws);
    std::size_t best = 0;
    for (std::size_t c = 1; c < c_; ++c)
      if (ws.logits[c] > ws.logits[best]) best = c;
    return best;
  }

  static void softmax_in_place(std::span<double> v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double z = 0.0;
    for (auto& x : v) z += (x = std::exp(x - mx));
    for (auto& x : v) x /= z;
  }

 private:
  static double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  }

  Architecture arch_;
  std::size_t d_, c_, h_;
  std::shared_ptr<const ShapeManifest> layout_;
};

// Penalty (mu/2) * ||w - anchor||^2 added to the local objective.
struct ProximalTerm {
  const ParamVector* anchor = nullptr;
  double mu = 0.0;
};

struct LossAndGradient {
  double loss;
  ParamVector grad;
};

namespace detail {

inline void check_batch(const TaskModel& model, const DataSplit& data) {
  if (data.dim != model.input_dim())
    throw ShapeError("data has " + std::to_string(data.dim) + " features, model expects " +
                     std::to_string(model.input_dim()));
  for (int y : data.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= model.num_classes())
      throw ValidationError("label " + std::to_string(y) + " outside [0, num_classes)");
}

// Mean loss and gradient over data rows `rows`, written into grad (resized).
// Returns the mean loss, including the proximal penalty when mu > 0.
inline double batch_loss_grad(const TaskModel& model, std::span<const double> w,
                              const DataSplit& data, std::span<const std::size_t> rows,
                              std::span<const double> anchor, double mu,
                              std::vector<double>& grad, TaskModel::Workspace& ws) {
  grad.assign(w.size(), 0.0);
  double total = 0.0;
  for (auto r : rows) total += model.accumulate(w, data.row(r), data.labels[r], grad, ws);
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto& g : grad) g *= inv;
  double loss = total * inv;
  if (mu > 0.0) {
    double sq = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double diff = w[j] - anchor[j];
      grad[j] += mu * diff;
      sq += diff * diff;
    }
    loss += 0.5 * mu * sq;
  }
  return loss;
}

}  // namespace detail

// Mean cross-entropy over the batch (plus the proximal penalty, if given)
// and its gradient with respect to the weights.
inline LossAndGradient loss_and_gradient(const TaskModel& model, const ParamVector& weights,
                                         const DataSplit& batch, ProximalTerm prox = {}) {
  model.require_layout(weights);
  if (batch.empty()) throw EmptyInputError("loss over an empty batch");
  detail::check_batch(model, batch);
  std::span<const double> anchor;
  if (prox.mu > 0.0) {
    if (!prox.anchor) throw ConfigError("proximal term needs an anchor");
    model.require_layout(*prox.anchor);
    anchor = prox.anchor->values();
  }
  std::vector<std::size_t> rows(batch.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<double> grad;
  auto ws = model.workspace();
  const double loss =
      detail::batch_loss_grad(model, weights.values(), batch, rows, anchor, prox.mu, grad, ws);
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");
  return {loss, ParamVector(weights.manifest_ptr(), std::move(grad))};
}

// Fraction of rows whose argmax prediction equals the label.
inline double evaluate_accuracy(const TaskModel& model, const ParamVector& weights,
                                const DataSplit& split) {
  model.require_layout(weights);
  if (split.empty()) throw EmptyInputError("accuracy over an empty split");
  detail::check_batch(model, split);
  auto ws = model.workspace();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (model.predict(weights.values(), split.row(i), ws) ==
        static_cast<std::size_t>(split.labels[i]))
      ++correct;
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

inline double mean_loss(const TaskModel& model, const ParamVector& weights,
                        const DataSplit& split) {
  return loss_and_gradient(model, weights, split).loss;
}

}  // namespace fedsim
