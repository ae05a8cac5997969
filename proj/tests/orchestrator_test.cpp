#include <cstring>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "fedsim/checkpoint.hpp"
#include "fedsim/orchestrator.hpp"

using namespace fedsim;

namespace {

Federation small_federation(std::size_t clients = 4) {
  FederationConfig cfg;
  cfg.num_clients = clients;
  cfg.split = {60, 20, 20};
  cfg.feature_dim = 8;
  return generate_federation(cfg);
}

bool bit_equal(const ParamVector& a, const ParamVector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

const TaskModel kModel = TaskModel::linear(8, 4);

}  // namespace

TEST(Schedule, PresetsSplitTheSameBudget) {
  const auto& p = schedule_presets();
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p[0].name, "Opt-1");
  EXPECT_EQ(find_preset("Opt-1"), (RoundSchedule{3, 50}));
  EXPECT_EQ(find_preset("Opt-2"), (RoundSchedule{5, 30}));
  EXPECT_EQ(find_preset("Opt-3"), (RoundSchedule{10, 15}));
  EXPECT_EQ(find_preset("Opt-4"), (RoundSchedule{15, 10}));
  for (const auto& s : p) EXPECT_EQ(s.schedule.total_epochs(), 150);
  EXPECT_THROW(find_preset("Opt-9"), ConfigError);
  EXPECT_THROW((RoundSchedule{0, 5}).validate(), ConfigError);
}

TEST(RunFederated, EpochAccountingAndHistory) {
  auto fed = small_federation();
  auto r = run_federated(kModel, fed, AggregatorState::make(Strategy::fedavg), {10, 15},
                         TrainerConfig{}, kModel.initial_weights(1));
  ASSERT_EQ(r.history.size(), 10u);
  for (int t = 0; t < 10; ++t) {
    EXPECT_EQ(r.history[t].round, t + 1);
    EXPECT_EQ(r.history[t].cumulative_epochs, 15 * (t + 1));
    EXPECT_EQ(r.history[t].client_metrics.size(), 4u);
    EXPECT_GE(r.history[t].val_metric, 0.0);
    EXPECT_LE(r.history[t].val_metric, 1.0);
  }
  for (int e : r.epochs_per_client) EXPECT_EQ(e, 150);
  EXPECT_EQ(r.client_test_metrics.size(), 4u);
  EXPECT_DOUBLE_EQ(r.client_test_average,
                   std::accumulate(r.client_test_metrics.begin(), r.client_test_metrics.end(), 0.0) / 4);
}

TEST(RunFederated, SingleClientOneRoundEqualsLocalTraining) {
  auto fed = small_federation(1);
  const auto init = kModel.initial_weights(2);
  TrainerConfig cfg;
  cfg.epochs = 6;
  auto local = train(kModel, init, fed.clients[0], cfg, 0);
  for (auto s : {Strategy::fedavg, Strategy::fedprox, Strategy::fedmedian}) {
    auto r = run_federated(kModel, fed, AggregatorState::make(s), {1, 6}, cfg, init);
    ASSERT_EQ(r.history.size(), 1u);
    EXPECT_TRUE(bit_equal(r.final_weights, local.weights)) << to_string(s);
  }
}

TEST(RunFederated, ParallelClientsMatchSequential) {
  auto fed = small_federation(5);
  const auto init = kModel.initial_weights(4);
  for (auto s : all_strategies()) {
    RunOptions seq, par;
    par.parallelism = 4;
    auto a = run_federated(kModel, fed, AggregatorState::make(s), {3, 4}, {}, init, seq);
    auto b = run_federated(kModel, fed, AggregatorState::make(s), {3, 4}, {}, init, par);
    EXPECT_TRUE(bit_equal(a.final_weights, b.final_weights)) << to_string(s);
    for (std::size_t t = 0; t < a.history.size(); ++t)
      EXPECT_EQ(a.history[t].val_metric, b.history[t].val_metric);
  }
}

TEST(RunFederated, DeterministicAcrossRuns) {
  auto fed = small_federation();
  const auto init = kModel.initial_weights(8);
  auto a = run_federated(kModel, fed, AggregatorState::make(Strategy::fedopt), {4, 3}, {}, init);
  auto b = run_federated(kModel, fed, AggregatorState::make(Strategy::fedopt), {4, 3}, {}, init);
  EXPECT_TRUE(bit_equal(a.final_weights, b.final_weights));
  EXPECT_EQ(a.test_metric, b.test_metric);
}

TEST(RunFederated, DivergenceCarriesRoundAndClient) {
  auto fed = small_federation();
  for (auto& x : fed.clients[2].train.features) x *= 1e200;
  try {
    run_federated(kModel, fed, AggregatorState::make(Strategy::fedavg), {3, 5}, {},
                  kModel.initial_weights(1));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.round(), 1);
    EXPECT_EQ(e.client(), 3);
    EXPECT_GE(e.epoch(), 0);
  }
}

TEST(RunFederated, WritesRoundCheckpoints) {
  const auto dir = std::filesystem::temp_directory_path() / "fedsim_orch_ckpt";
  std::filesystem::remove_all(dir);
  auto fed = small_federation();
  RunOptions opt;
  opt.checkpoint_dir = dir;
  auto r = run_federated(kModel, fed, AggregatorState::make(Strategy::fedavg), {3, 2}, {},
                         kModel.initial_weights(1), opt);
  for (int t = 1; t <= 3; ++t)
    EXPECT_TRUE(std::filesystem::exists(dir / ("round_" + std::to_string(t) + ".ckpt")));
  EXPECT_EQ(r.history.back().checkpoint, (dir / "round_3.ckpt").string());
  EXPECT_TRUE(bit_equal(load_checkpoint(dir / "round_3.ckpt"), r.final_weights));
  std::filesystem::remove_all(dir);
}

TEST(RunFederated, PatienceStopsEarly) {
  auto fed = small_federation();
  RunOptions opt;
  opt.patience = 1;
  TrainerConfig cfg;
  cfg.learning_rate = 1e-9;  // nothing improves after the first round
  auto r = run_federated(kModel, fed, AggregatorState::make(Strategy::fedavg), {10, 1}, cfg,
                         kModel.initial_weights(1), opt);
  EXPECT_EQ(r.history.size(), 2u);
}

TEST(RunFederated, RejectsMismatchedModel) {
  auto fed = small_federation();
  auto wide = TaskModel::linear(9, 4);
  EXPECT_THROW(run_federated(wide, fed, AggregatorState::make(Strategy::fedavg), {1, 1}, {},
                             wide.initial_weights(1)),
               ConfigError);
  Federation empty;
  EXPECT_THROW(run_federated(kModel, empty, AggregatorState::make(Strategy::fedavg), {1, 1}, {},
                             kModel.initial_weights(1)),
               ConfigError);
}

TEST(LocalBaseline, OneModelPerClient) {
  auto fed = small_federation(8);
  TrainerConfig cfg;
  cfg.epochs = 5;
  auto r = run_local_baseline(kModel, fed, cfg, kModel.initial_weights(1));
  ASSERT_EQ(r.clients.size(), 8u);
  double sum = 0.0;
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(r.clients[k].client_id, static_cast<int>(k + 1));
    EXPECT_EQ(r.clients[k].epochs, 5);
    sum += r.clients[k].test_metric;
  }
  EXPECT_DOUBLE_EQ(r.average_test_metric, sum / 8.0);
}

TEST(LocalBaseline, IdenticalClientsGetIdenticalModels) {
  auto fed = small_federation(1);
  auto twin = fed.clients[0];
  twin.client_id = 2;
  fed.clients.push_back(twin);
  fed.group_all = pool_clients(fed.clients);
  TrainerConfig cfg;
  cfg.epochs = 3;
  auto r = run_local_baseline(kModel, fed, cfg, kModel.initial_weights(1));
  EXPECT_TRUE(bit_equal(r.clients[0].weights, r.clients[1].weights));
  EXPECT_EQ(r.clients[0].test_metric, r.clients[1].test_metric);
}

TEST(GlobalBaseline, SingleClientPoolMatchesLocalBaseline) {
  auto fed = small_federation(1);
  TrainerConfig cfg;
  cfg.epochs = 5;
  const auto init = kModel.initial_weights(6);
  auto g = run_global_baseline(kModel, fed, cfg, init);
  auto l = run_local_baseline(kModel, fed, cfg, init);
  EXPECT_TRUE(bit_equal(g.weights, l.clients[0].weights));
  EXPECT_EQ(g.test_metric, l.average_test_metric);
  EXPECT_EQ(g.epochs, 5);
}

TEST(GlobalBaseline, Deterministic) {
  auto fed = small_federation();
  TrainerConfig cfg;
  cfg.epochs = 4;
  auto a = run_global_baseline(kModel, fed, cfg, kModel.initial_weights(1));
  auto b = run_global_baseline(kModel, fed, cfg, kModel.initial_weights(1));
  EXPECT_TRUE(bit_equal(a.weights, b.weights));
  EXPECT_EQ(a.client_test_metrics.size(), 4u);
}
