#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/param_vector.hpp"
#include "fedsim/random.hpp"
#include "fedsim/synthetic_task.hpp"
#include "fedsim/task_model.hpp"

namespace fedsim {

inline constexpr double kDefaultProxMu = 0.01;

struct TrainerConfig {
  int epochs = 15;
  std::size_t batch_size = 20;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;
  // 0 disables the proximal term.
  double prox_mu = 0.0;

  bool operator==(const TrainerConfig&) const = default;

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be nonnegative");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("learning_rate must be positive");
    if (!(prox_mu >= 0.0) || !std::isfinite(prox_mu))
      throw ConfigError("prox_mu must be nonnegative");
  }
};

struct ClientUpdate {
  int client_id = 0;
  ParamVector weights;
  std::size_t sample_count = 0;
  // Mean training objective seen during each epoch, one entry per epoch.
  std::vector<double> loss_trace;
};

// Mini-batch SGD over dataset.train for cfg.epochs epochs, starting from
// `initial`. Each epoch visits the rows in a permutation drawn from
// (cfg.seed, round, epoch), rounds counted from 0; the final short batch is
// kept. With prox_mu > 0 every step adds prox_mu * (w - initial) to the
// gradient.
inline ClientUpdate train(const TaskModel& model, const ParamVector& initial,
                          const ClientDataset& dataset, const TrainerConfig& cfg,
                          int round = 0) {
  cfg.validate();
  model.require_layout(initial);
  const DataSplit& data = dataset.train;
  if (data.empty())
    throw EmptyInputError("client " + std::to_string(dataset.client_id) + " has no training data");
  detail::check_batch(model, data);

  ClientUpdate update;
  update.client_id = dataset.client_id;
  update.sample_count = data.size();
  update.loss_trace.reserve(static_cast<std::size_t>(cfg.epochs));
  if (cfg.epochs == 0) {
    update.weights = initial;
    return update;
  }

  std::vector<double> w(initial.values().begin(), initial.values().end());
  const auto anchor = initial.values();
  std::vector<double> grad;
  auto ws = model.workspace();
  const std::size_t n = data.size();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed({cfg.seed, static_cast<std::uint64_t>(round),
                         static_cast<std::uint64_t>(epoch)}));
    const auto order = rng.permutation(n);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const auto rows = std::span<const std::size_t>(order).subspan(
          start, std::min(cfg.batch_size, n - start));
      const double loss =
          detail::batch_loss_grad(model, w, data, rows, anchor, cfg.prox_mu, grad, ws);
      if (!std::isfinite(loss))
        throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch) +
                                  " on client " + std::to_string(dataset.client_id),
                              epoch);
      epoch_loss += loss * static_cast<double>(rows.size());
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= cfg.learning_rate * grad[j];
    }
    if (!std::all_of(w.begin(), w.end(), [](double x) { return std::isfinite(x); }))
      throw DivergenceError("weights diverged in epoch " + std::to_string(epoch) +
                                " on client " + std::to_string(dataset.client_id),
                            epoch);
    update.loss_trace.push_back(epoch_loss / static_cast<double>(n));
  }
  update.weights = ParamVector(initial.manifest_ptr(), std::move(w));
  return update;
}

// Centralized training over the pooled Group-All data.
inline ClientUpdate pooled_train(const TaskModel& model, const ParamVector& initial,
                                 const ClientDataset& group_all, const TrainerConfig& cfg) {
  return train(model, initial, group_all, cfg, 0);
}

}  // namespace fedsim
