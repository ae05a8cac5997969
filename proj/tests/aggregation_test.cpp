#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fedsim/aggregation.hpp"

using namespace fedsim;

namespace {

ClientUpdate update(int id, std::vector<double> w, std::size_t n = 200) {
  return {id, ParamVector::flat(std::move(w)), n, {}};
}

std::vector<ClientUpdate> random_updates(std::mt19937_64& gen, std::size_t k, std::size_t dim) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<ClientUpdate> out;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> w(dim);
    for (auto& x : w) x = u(gen);
    out.push_back(update(static_cast<int>(i + 1), w, 1 + gen() % 400));
  }
  return out;
}

// Scalar reference for one server optimizer coordinate.
struct ScalarOpt {
  FedOptConfig cfg;
  double m = 0.0, v;
  explicit ScalarOpt(FedOptConfig c) : cfg(c), v(c.initial_accumulator) {}
  double step(double x, double delta) {
    m = cfg.beta1 * m + (1 - cfg.beta1) * delta;
    if (cfg.variant == FedOptVariant::adam)
      v = cfg.beta2 * v + (1 - cfg.beta2) * delta * delta;
    else if (cfg.variant == FedOptVariant::adagrad)
      v += delta * delta;
    else if (v > delta * delta)
      v -= (1 - cfg.beta2) * delta * delta;
    else if (v < delta * delta)
      v += (1 - cfg.beta2) * delta * delta;
    return x + cfg.server_lr * m / (std::sqrt(v) + cfg.tau);
  }
};

}  // namespace

TEST(Aggregate, IdenticalUpdatesReturnThatUpdate) {
  const std::vector<double> w = {0.25, -1.5, 3.0};
  std::vector<ClientUpdate> ups = {update(1, w, 10), update(2, w, 500), update(3, w, 7)};
  const auto g = ParamVector::flat({0, 0, 0});
  for (auto s : {Strategy::fedavg, Strategy::fedprox, Strategy::fedmedian}) {
    auto r = aggregate(AggregatorState::make(s), g, ups);
    EXPECT_EQ(r.global, ParamVector::flat(w)) << to_string(s);
  }
}

TEST(Aggregate, FedAvgWeightsBySampleCount) {
  std::vector<ClientUpdate> ups = {update(1, {0}, 100), update(2, {4}, 300)};
  auto r = aggregate(AggregatorState::make(Strategy::fedavg), ParamVector::flat({0}), ups);
  EXPECT_DOUBLE_EQ(r.global[0], 3.0);
}

TEST(Aggregate, FedMedianResistsOneOutlier) {
  std::vector<ClientUpdate> ups;
  for (int i = 1; i <= 7; ++i) ups.push_back(update(i, {1.0 + 0.01 * i, -2.0}));
  ups.push_back(update(8, {1e6, -1e6}));
  auto med = aggregate(AggregatorState::make(Strategy::fedmedian), ParamVector::flat({0, 0}), ups);
  // sorted first coordinate: 1.01..1.07, 1e6 -> midpoint of 1.04 and 1.05
  EXPECT_NEAR(med.global[0], 1.045, 1e-12);
  EXPECT_EQ(med.global[1], -2.0);
  auto avg = aggregate(AggregatorState::make(Strategy::fedavg), ParamVector::flat({0, 0}), ups);
  EXPECT_GT(avg.global[0], 1e5);
}

TEST(Aggregate, ResultDoesNotDependOnArrivalOrder) {
  std::mt19937_64 gen(21);
  for (auto s : {Strategy::fedavg, Strategy::fedprox, Strategy::fedmedian, Strategy::fedopt}) {
    for (int trial = 0; trial < 30; ++trial) {
      auto ups = random_updates(gen, 1 + gen() % 8, 6);
      const auto g = ParamVector::flat(std::vector<double>(6, 0.5));
      auto a = aggregate(AggregatorState::make(s), g, ups);
      std::shuffle(ups.begin(), ups.end(), gen);
      auto b = aggregate(AggregatorState::make(s), g, ups);
      EXPECT_EQ(a.global, b.global) << to_string(s);
    }
  }
}

TEST(Aggregate, AveragingStaysInsideClientHull) {
  std::mt19937_64 gen(5);
  for (auto s : {Strategy::fedavg, Strategy::fedprox, Strategy::fedmedian}) {
    for (int trial = 0; trial < 50; ++trial) {
      auto ups = random_updates(gen, 1 + gen() % 9, 5);
      auto r = aggregate(AggregatorState::make(s), ParamVector::flat(std::vector<double>(5)), ups);
      for (std::size_t j = 0; j < 5; ++j) {
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& u : ups) lo = std::min(lo, u.weights[j]), hi = std::max(hi, u.weights[j]);
        EXPECT_GE(r.global[j], lo);
        EXPECT_LE(r.global[j], hi);
      }
    }
  }
}

TEST(Aggregate, SingleClientAveragingReturnsIt) {
  std::vector<ClientUpdate> ups = {update(4, {1, 2, 3}, 17)};
  for (auto s : {Strategy::fedavg, Strategy::fedprox, Strategy::fedmedian})
    EXPECT_EQ(aggregate(AggregatorState::make(s), ParamVector::flat({9, 9, 9}), ups).global,
              ParamVector::flat({1, 2, 3}));
}

TEST(Aggregate, Errors) {
  std::vector<ClientUpdate> none;
  EXPECT_THROW(aggregate(AggregatorState::make(Strategy::fedavg), ParamVector::flat({0}), none),
               EmptyInputError);
  std::vector<ClientUpdate> bad = {update(1, {1, 2})};
  EXPECT_THROW(aggregate(AggregatorState::make(Strategy::fedavg), ParamVector::flat({0}), bad),
               ShapeError);
  FedOptConfig opt;
  opt.tau = 0.0;
  EXPECT_THROW(AggregatorState::make(Strategy::fedopt, opt), ConfigError);
  opt = {};
  opt.beta1 = 1.0;
  EXPECT_THROW(AggregatorState::make(Strategy::fedopt, opt), ConfigError);
}

TEST(FedOpt, ZeroDeltaIsAFixedPoint) {
  const auto g = ParamVector::flat({0.3, -0.7});
  std::vector<ClientUpdate> ups = {update(1, {0.3, -0.7}), update(2, {0.3, -0.7})};
  auto state = AggregatorState::make(Strategy::fedopt);
  for (int t = 0; t < 5; ++t) {
    auto r = aggregate(state, g, ups);
    EXPECT_EQ(r.global, g);
    state = r.state;
  }
}

TEST(FedOpt, FirstAdamStepByHand) {
  // delta = 1: m = 0.1, v = 0.01, step = 0.1 * 0.1 / (0.1 + 0.001)
  std::vector<ClientUpdate> ups = {update(1, {1.0})};
  auto r = aggregate(AggregatorState::make(Strategy::fedopt), ParamVector::flat({0.0}), ups);
  EXPECT_NEAR(r.global[0], 0.01 / 0.101, 1e-15);
  EXPECT_NEAR((*r.state.first_moment)[0], 0.1, 1e-15);
  EXPECT_NEAR((*r.state.second_moment)[0], 0.01, 1e-15);
}

TEST(FedOpt, AllVariantsMatchScalarReferenceOverRounds) {
  std::mt19937_64 gen(77);
  std::normal_distribution<double> nd;
  for (auto variant : {FedOptVariant::adam, FedOptVariant::adagrad, FedOptVariant::yogi}) {
    FedOptConfig cfg;
    cfg.variant = variant;
    cfg.initial_accumulator = variant == FedOptVariant::yogi ? 1e-6 : 0.0;
    auto state = AggregatorState::make(Strategy::fedopt, cfg);
    ScalarOpt ref0(cfg), ref1(cfg);
    auto g = ParamVector::flat({0.0, 1.0});
    for (int t = 0; t < 12; ++t) {
      const double a = nd(gen), b = nd(gen), c = nd(gen), d = nd(gen);
      std::vector<ClientUpdate> ups = {update(1, {g[0] + a, g[1] + b}, 100),
                                       update(2, {g[0] + c, g[1] + d}, 300)};
      const double d0 = 0.25 * a + 0.75 * c, d1 = 0.25 * b + 0.75 * d;
      const double e0 = ref0.step(g[0], d0), e1 = ref1.step(g[1], d1);
      auto r = aggregate(state, g, ups);
      EXPECT_NEAR(r.global[0], e0, 1e-12) << to_string(variant) << " round " << t;
      EXPECT_NEAR(r.global[1], e1, 1e-12) << to_string(variant) << " round " << t;
      g = r.global;
      state = r.state;
    }
  }
}

TEST(FedOpt, VanishingServerStepLeavesGlobalUnchanged) {
  FedOptConfig cfg;
  cfg.server_lr = 1e-300;
  std::vector<ClientUpdate> ups = {update(1, {5, -5})};
  auto g = ParamVector::flat({1, 2});
  auto r = aggregate(AggregatorState::make(Strategy::fedopt, cfg), g, ups);
  EXPECT_EQ(r.global, g);
}

TEST(FedOpt, UniformWeightingIgnoresCounts) {
  FedOptConfig cfg;
  cfg.uniform_weighting = true;
  std::vector<ClientUpdate> ups = {update(1, {0}, 100), update(2, {4}, 300)};
  auto r = aggregate(AggregatorState::make(Strategy::fedopt, cfg), ParamVector::flat({0}), ups);
  // delta = 2: m = 0.2, v = 0.04
  EXPECT_NEAR(r.global[0], 0.1 * 0.2 / (0.2 + 1e-3), 1e-15);
}

TEST(FedOpt, SecondMomentStaysNonNegative) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (auto variant : {FedOptVariant::adam, FedOptVariant::adagrad, FedOptVariant::yogi}) {
    FedOptConfig cfg;
    cfg.variant = variant;
    auto state = AggregatorState::make(Strategy::fedopt, cfg);
    auto g = ParamVector::flat({0, 0, 0});
    for (int t = 0; t < 40; ++t) {
      std::vector<ClientUpdate> ups = {update(1, {nd(gen), nd(gen), nd(gen)})};
      auto r = aggregate(state, g, ups);
      for (std::size_t j = 0; j < 3; ++j) EXPECT_GE((*r.state.second_moment)[j], 0.0);
      g = r.global;
      state = r.state;
    }
  }
}

TEST(StrategyNames, RoundTrip) {
  for (auto s : all_strategies()) EXPECT_EQ(parse_strategy(to_string(s)), s);
  for (auto v : {FedOptVariant::adam, FedOptVariant::adagrad, FedOptVariant::yogi})
    EXPECT_EQ(parse_fedopt_variant(to_string(v)), v);
  EXPECT_THROW(parse_strategy("fedsgd"), ConfigError);
  EXPECT_EQ(all_strategies().size(), 4u);
}
