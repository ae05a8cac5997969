#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/checkpoint.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/local_trainer.hpp"
#include "fedsim/param_vector.hpp"
#include "fedsim/synthetic_task.hpp"
#include "fedsim/task_model.hpp"

namespace fedsim {

struct RoundSchedule {
  int rounds = 10;
  int local_epochs = 15;

  int total_epochs() const { return rounds * local_epochs; }

  void validate() const {
    if (rounds < 1) throw ConfigError("rounds must be at least 1");
    if (local_epochs < 1) throw ConfigError("local_epochs must be at least 1");
  }

  bool operator==(const RoundSchedule&) const = default;
};

struct NamedSchedule {
  std::string name;
  RoundSchedule schedule;
};

// The four round/epoch splits of a fixed 150-epoch budget.
inline const std::vector<NamedSchedule>& schedule_presets() {
  static const std::vector<NamedSchedule> presets = {
      {"Opt-1", {3, 50}},
      {"Opt-2", {5, 30}},
      {"Opt-3", {10, 15}},
      {"Opt-4", {15, 10}},
  };
  return presets;
}

inline RoundSchedule find_preset(const std::string& name) {
  for (const auto& p : schedule_presets())
    if (p.name == name) return p.schedule;
  throw ConfigError("unknown schedule preset '" + name + "'");
}

struct RunOptions {
  // Number of worker threads for client training; 1 runs clients in order.
  unsigned parallelism = 1;
  // Stop after this many rounds without a validation improvement; 0 = never.
  int patience = 0;
  // When set, the global model is checkpointed here after every round.
  std::filesystem::path checkpoint_dir;
};

struct RoundRecord {
  int round = 0;
  std::string checkpoint;  // empty unless checkpointing is on
  double val_metric = 0.0;  // Group-All validation accuracy
  double train_loss = 0.0;  // Group-All training loss of the global model
  std::vector<double> client_metrics;  // per-client validation accuracy
  int cumulative_epochs = 0;
  double duration_s = 0.0;  // wall clock since the run started
};

struct FederationRunResult {
  Strategy strategy = Strategy::fedavg;
  RoundSchedule schedule;
  std::vector<RoundRecord> history;
  ParamVector final_weights;
  double test_metric = 0.0;  // Group-All test accuracy
  std::vector<double> client_test_metrics;
  double client_test_average = 0.0;
  // Local epochs actually executed by each client, summed over rounds.
  std::vector<int> epochs_per_client;
  double duration_s = 0.0;
};

struct ClientBaseline {
  int client_id = 0;
  ParamVector weights;
  double test_metric = 0.0;       // on the pooled Group-All test split
  double own_test_metric = 0.0;   // on the client's own test split
  int epochs = 0;
};

struct LocalBaselineResult {
  std::vector<ClientBaseline> clients;
  double average_test_metric = 0.0;
  double duration_s = 0.0;
};

struct GlobalBaselineResult {
  ParamVector weights;
  double test_metric = 0.0;
  std::vector<double> client_test_metrics;
  int epochs = 0;
  double duration_s = 0.0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct ClientFailure {
  std::size_t index = 0;
  std::exception_ptr error;
};

// Runs job(i) for i in [0, n) on up to `parallelism` threads. Results must be
// written by index. Returns the failure with the lowest index, if any, once
// every job has finished.
inline std::optional<ClientFailure> for_each_client(std::size_t n, unsigned parallelism,
                                                    const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t i) {
    try {
      job(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min<std::size_t>(std::max(parallelism, 1u), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) guarded(i);
      });
  }
  for (std::size_t i = 0; i < n; ++i)
    if (errors[i]) return ClientFailure{i, errors[i]};
  return std::nullopt;
}

// Rethrows a client failure, attaching round and client id to divergence.
[[noreturn]] inline void rethrow_client_failure(const ClientFailure& f, int round, int client_id) {
  try {
    std::rethrow_exception(f.error);
  } catch (const DivergenceError& e) {
    const std::string where = round > 0 ? "round " + std::to_string(round) + ": " : "";
    throw DivergenceError(where + e.what(), e.epoch(), round, client_id);
  }
}

inline std::vector<double> per_client_accuracy(const TaskModel& model, const ParamVector& w,
                                               const std::vector<ClientDataset>& clients,
                                               DataSplit ClientDataset::*split) {
  std::vector<double> out;
  out.reserve(clients.size());
  for (const auto& c : clients) out.push_back(evaluate_accuracy(model, w, c.*split));
  return out;
}

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline void require_clients(const TaskModel& model, const Federation& fed) {
  if (fed.clients.empty()) throw ConfigError("federation has no clients");
  for (const auto& c : fed.clients)
    if (c.train.dim != model.input_dim())
      throw ConfigError("client " + std::to_string(c.client_id) + " has " +
                        std::to_string(c.train.dim) + " features, model expects " +
                        std::to_string(model.input_dim()));
}

}  // namespace detail

// Broadcast -> local training on every client -> aggregation -> evaluation,
// repeated schedule.rounds times. The trainer config is used as given apart
// from its epoch count, which the schedule overrides.
inline FederationRunResult run_federated(const TaskModel& model, const Federation& fed,
                                         const AggregatorState& strategy,
                                         const RoundSchedule& schedule,
                                         TrainerConfig trainer, const ParamVector& initial,
                                         const RunOptions& options = {}) {
  schedule.validate();
  detail::require_clients(model, fed);
  model.require_layout(initial);
  trainer.epochs = schedule.local_epochs;
  trainer.validate();

  const auto start = detail::Clock::now();
  FederationRunResult result;
  result.strategy = strategy.strategy;
  result.schedule = schedule;
  result.epochs_per_client.assign(fed.clients.size(), 0);

  AggregatorState state = strategy;
  ParamVector global = initial;
  double best_val = -1.0;
  int stale_rounds = 0;
  std::vector<ClientUpdate> updates(fed.clients.size());

  for (int round = 1; round <= schedule.rounds; ++round) {
    if (auto failure = detail::for_each_client(
            fed.clients.size(), options.parallelism,
            [&](std::size_t i) { updates[i] = train(model, global, fed.clients[i], trainer, round - 1); }))
      detail::rethrow_client_failure(*failure, round, fed.clients[failure->index].client_id);
    for (std::size_t i = 0; i < updates.size(); ++i)
      result.epochs_per_client[i] += static_cast<int>(updates[i].loss_trace.size());

    auto agg = aggregate(state, global, updates);
    global = std::move(agg.global);
    state = std::move(agg.state);
    for (auto& u : updates) u = ClientUpdate{};

    RoundRecord rec;
    rec.round = round;
    rec.val_metric = evaluate_accuracy(model, global, fed.group_all.val);
    rec.train_loss = mean_loss(model, global, fed.group_all.train);
    rec.client_metrics = detail::per_client_accuracy(model, global, fed.clients, &ClientDataset::val);
    rec.cumulative_epochs = round * schedule.local_epochs;
    if (!options.checkpoint_dir.empty()) {
      auto path = options.checkpoint_dir / ("round_" + std::to_string(round) + ".ckpt");
      save_checkpoint(path, global);
      rec.checkpoint = path.string();
    }
    rec.duration_s = detail::seconds_since(start);
    result.history.push_back(std::move(rec));

    if (options.patience > 0) {
      const double val = result.history.back().val_metric;
      if (val > best_val) {
        best_val = val;
        stale_rounds = 0;
      } else if (++stale_rounds >= options.patience) {
        break;
      }
    }
  }

  result.final_weights = global;
  result.test_metric = evaluate_accuracy(model, global, fed.group_all.test);
  result.client_test_metrics =
      detail::per_client_accuracy(model, global, fed.clients, &ClientDataset::test);
  result.client_test_average = detail::mean(result.client_test_metrics);
  result.duration_s = detail::seconds_since(start);
  return result;
}

// Each client trains alone for trainer.epochs epochs; every resulting model
// is scored on the pooled Group-All test split.
inline LocalBaselineResult run_local_baseline(const TaskModel& model, const Federation& fed,
                                              const TrainerConfig& trainer,
                                              const ParamVector& initial,
                                              const RunOptions& options = {}) {
  detail::require_clients(model, fed);
  const auto start = detail::Clock::now();
  std::vector<ClientUpdate> updates(fed.clients.size());
  if (auto failure = detail::for_each_client(
          fed.clients.size(), options.parallelism,
          [&](std::size_t i) { updates[i] = train(model, initial, fed.clients[i], trainer, 0); }))
    detail::rethrow_client_failure(*failure, 0, fed.clients[failure->index].client_id);

  LocalBaselineResult result;
  std::vector<double> metrics;
  for (std::size_t i = 0; i < fed.clients.size(); ++i) {
    ClientBaseline cb;
    cb.client_id = fed.clients[i].client_id;
    cb.weights = std::move(updates[i].weights);
    cb.test_metric = evaluate_accuracy(model, cb.weights, fed.group_all.test);
    cb.own_test_metric = evaluate_accuracy(model, cb.weights, fed.clients[i].test);
    cb.epochs = static_cast<int>(updates[i].loss_trace.size());
    metrics.push_back(cb.test_metric);
    result.clients.push_back(std::move(cb));
  }
  result.average_test_metric = detail::mean(metrics);
  result.duration_s = detail::seconds_since(start);
  return result;
}

// One model trained on the pooled Group-All training split.
inline GlobalBaselineResult run_global_baseline(const TaskModel& model, const Federation& fed,
                                                const TrainerConfig& trainer,
                                                const ParamVector& initial) {
  if (fed.group_all.train.empty()) throw ConfigError("Group-All has no training data");
  const auto start = detail::Clock::now();
  auto update = pooled_train(model, initial, fed.group_all, trainer);
  GlobalBaselineResult result;
  result.weights = std::move(update.weights);
  result.epochs = static_cast<int>(update.loss_trace.size());
  result.test_metric = evaluate_accuracy(model, result.weights, fed.group_all.test);
  result.client_test_metrics =
      detail::per_client_accuracy(model, result.weights, fed.clients, &ClientDataset::test);
  result.duration_s = detail::seconds_since(start);
  return result;
}

}  // namespace fedsim
