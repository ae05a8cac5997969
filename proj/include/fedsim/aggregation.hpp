#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/local_trainer.hpp"
#include "fedsim/param_vector.hpp"

namespace fedsim {

enum class Strategy { fedavg, fedprox, fedmedian, fedopt };
enum class FedOptVariant { adagrad, adam, yogi };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::fedavg: return "fedavg";
    case Strategy::fedprox: return "fedprox";
    case Strategy::fedmedian: return "fedmedian";
    case Strategy::fedopt: return "fedopt";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "fedavg") return Strategy::fedavg;
  if (s == "fedprox") return Strategy::fedprox;
  if (s == "fedmedian") return Strategy::fedmedian;
  if (s == "fedopt") return Strategy::fedopt;
  throw ConfigError("unknown strategy '" + s + "'");
}

inline std::string to_string(FedOptVariant v) {
  switch (v) {
    case FedOptVariant::adagrad: return "adagrad";
    case FedOptVariant::adam: return "adam";
    case FedOptVariant::yogi: return "yogi";
  }
  return "?";
}

inline FedOptVariant parse_fedopt_variant(const std::string& s) {
  if (s == "adagrad") return FedOptVariant::adagrad;
  if (s == "adam") return FedOptVariant::adam;
  if (s == "yogi") return FedOptVariant::yogi;
  throw ConfigError("unknown fedopt variant '" + s + "'");
}

inline const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all = {Strategy::fedavg, Strategy::fedprox,
                                            Strategy::fedopt, Strategy::fedmedian};
  return all;
}

// Server optimizer settings. v starts at initial_accumulator in every
// coordinate; m starts at zero.
struct FedOptConfig {
  FedOptVariant variant = FedOptVariant::adam;
  double server_lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;
  double initial_accumulator = 0.0;
  // Average client deltas uniformly instead of by sample count.
  bool uniform_weighting = false;

  bool operator==(const FedOptConfig&) const = default;

  void validate() const {
    if (!(server_lr > 0.0) || !std::isfinite(server_lr))
      throw ConfigError("fedopt server_lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("fedopt beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("fedopt beta2 must lie in [0, 1)");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("fedopt tau must be positive");
    if (!(initial_accumulator >= 0.0) || !std::isfinite(initial_accumulator))
      throw ConfigError("fedopt initial_accumulator must be nonnegative");
  }
};

struct AggregatorState {
  Strategy strategy = Strategy::fedavg;
  FedOptConfig fedopt;
  // Server moments; empty until the first fedopt aggregation.
  std::optional<ParamVector> first_moment;
  std::optional<ParamVector> second_moment;

  static AggregatorState make(Strategy s, FedOptConfig opt = {}) {
    if (s == Strategy::fedopt) opt.validate();
    AggregatorState st;
    st.strategy = s;
    st.fedopt = opt;
    return st;
  }
};

struct AggregationResult {
  ParamVector global;
  AggregatorState state;
};

namespace detail {

inline ParamVector fedopt_step(AggregatorState& st, const ParamVector& global,
                               std::span<const ParamVector> weights,
                               std::span<const double> counts) {
  const auto& cfg = st.fedopt;
  cfg.validate();
  std::vector<ParamVector> deltas;
  deltas.reserve(weights.size());
  for (const auto& w : weights) deltas.push_back(sub(w, global));
  std::vector<double> mix(counts.begin(), counts.end());
  if (cfg.uniform_weighting) std::fill(mix.begin(), mix.end(), 1.0);
  const ParamVector delta = weighted_sum(deltas, mix);

  const std::size_t n = global.size();
  if (!st.first_moment) st.first_moment = ParamVector::zeros_like(global);
  if (!st.second_moment)
    st.second_moment = ParamVector(global.manifest_ptr(),
                                   std::vector<double>(n, cfg.initial_accumulator));
  detail::require_compatible(*st.first_moment, global);
  detail::require_compatible(*st.second_moment, global);

  std::vector<double> m(st.first_moment->values().begin(), st.first_moment->values().end());
  std::vector<double> v(st.second_moment->values().begin(), st.second_moment->values().end());
  std::vector<double> next(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double d = delta[j];
    const double d2 = d * d;
    m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * d;
    switch (cfg.variant) {
      case FedOptVariant::adagrad: v[j] = v[j] + d2; break;
      case FedOptVariant::adam: v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * d2; break;
      case FedOptVariant::yogi: {
        const double diff = v[j] - d2;
        const double sign = diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : 0.0;
        v[j] = v[j] - (1.0 - cfg.beta2) * d2 * sign;
        break;
      }
    }
    if (v[j] < -1e-12)
      throw NumericError("fedopt second moment negative at index " + std::to_string(j));
    const double root = std::sqrt(std::max(v[j], 0.0));
    next[j] = global[j] + cfg.server_lr * m[j] / (root + cfg.tau);
    if (!std::isfinite(next[j]))
      throw NumericError("fedopt produced a non-finite weight at index " + std::to_string(j));
  }
  st.first_moment = ParamVector(global.manifest_ptr(), std::move(m));
  st.second_moment = ParamVector(global.manifest_ptr(), std::move(v));
  return ParamVector(global.manifest_ptr(), std::move(next));
}

}  // namespace detail

// One server aggregation. Updates are ordered by client_id before any
// arithmetic, so the result does not depend on the order they arrived in.
inline AggregationResult aggregate(const AggregatorState& state, const ParamVector& global,
                                   std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw EmptyInputError("no client updates to aggregate");
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].client_id < updates[b].client_id;
  });

  std::vector<ParamVector> weights;
  std::vector<double> counts;
  weights.reserve(updates.size());
  for (auto i : order) {
    detail::require_compatible(global, updates[i].weights);
    weights.push_back(updates[i].weights);
    counts.push_back(static_cast<double>(updates[i].sample_count));
  }

  AggregationResult out{global, state};
  switch (state.strategy) {
    case Strategy::fedavg:
    case Strategy::fedprox:
      out.global = weighted_sum(weights, counts);
      break;
    case Strategy::fedmedian:
      out.global = coordinate_median(weights);
      break;
    case Strategy::fedopt:
      out.global = detail::fedopt_step(out.state, global, weights, counts);
      break;
  }
  return out;
}

inline AggregationResult aggregate(const AggregatorState& state, const ParamVector& global,
                                   const std::vector<ClientUpdate>& updates) {
  return aggregate(state, global, std::span<const ClientUpdate>(updates));
}

}  // namespace fedsim
