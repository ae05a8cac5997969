#pragma once

// Config-driven experiment drivers behind the fedsim CLI.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/aggregation.hpp"
#include "fedsim/checkpoint.hpp"
#include "fedsim/detection_metrics.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/local_trainer.hpp"
#include "fedsim/orchestrator.hpp"
#include "fedsim/synthetic_task.hpp"
#include "fedsim/task_model.hpp"

namespace fedsim {

using Json = nlohmann::json;
using Logger = std::function<void(const std::string&)>;

struct ModelSpec {
  Architecture architecture = Architecture::linear;
  std::size_t hidden_units = 16;
  double init_scale = 1.0;

  bool operator==(const ModelSpec&) const = default;
};

struct ExperimentConfig {
  FederationConfig federation;
  ModelSpec model;
  // `epochs` is not read from the file: the schedule sets it for federated
  // runs and total_epochs for baselines.
  TrainerConfig trainer;
  std::vector<Strategy> strategies = all_strategies();
  FedOptConfig fedopt;
  double fedprox_mu = kDefaultProxMu;
  // Either a preset name or an explicit (rounds, local_epochs).
  std::optional<std::string> preset = "Opt-3";
  RoundSchedule schedule{10, 15};
  std::optional<int> total_epochs = 150;
  // Presets compared by `sweep`.
  std::vector<std::string> sweep_presets = {"Opt-1", "Opt-2", "Opt-3", "Opt-4"};
  std::vector<std::string> scenarios = {"federated", "local", "global"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "runs/default";
  unsigned parallelism = 1;
  int patience = 0;
  bool checkpoint_rounds = false;

  bool operator==(const ExperimentConfig&) const = default;

  RoundSchedule resolved_schedule() const { return preset ? find_preset(*preset) : schedule; }

  int baseline_epochs() const {
    return total_epochs ? *total_epochs : resolved_schedule().total_epochs();
  }

  TaskModel make_model() const {
    return TaskModel(model.architecture, federation.feature_dim, federation.num_classes,
                     model.hidden_units);
  }

  void check_schedule(const RoundSchedule& s, const std::string& label) const {
    s.validate();
    if (total_epochs && s.total_epochs() != *total_epochs)
      throw ConfigError(label + " gives rounds x local_epochs = " + std::to_string(s.rounds) +
                        " x " + std::to_string(s.local_epochs) + " = " +
                        std::to_string(s.total_epochs()) + ", but total_epochs is " +
                        std::to_string(*total_epochs));
  }

  void validate() const {
    federation.validate();
    TrainerConfig t = trainer;
    t.epochs = 0;
    t.validate();
    fedopt.validate();
    if (!(fedprox_mu >= 0.0)) throw ConfigError("fedprox_mu must be nonnegative");
    if (strategies.empty()) throw ConfigError("no strategies selected");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (total_epochs && *total_epochs < 1) throw ConfigError("total_epochs must be positive");
    if (model.architecture == Architecture::one_hidden_layer && model.hidden_units == 0)
      throw ConfigError("hidden_units must be positive");
    if (!(model.init_scale >= 0.0)) throw ConfigError("init_scale must be nonnegative");
    if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
    if (patience < 0) throw ConfigError("patience must be nonnegative");
    check_schedule(resolved_schedule(), preset ? "preset " + *preset : "schedule");
    for (const auto& p : sweep_presets) check_schedule(find_preset(p), "preset " + p);
    for (const auto& s : scenarios)
      if (s != "federated" && s != "local" && s != "global")
        throw ConfigError("unknown scenario '" + s + "'");
  }

  // Trainer used by clients of `s`; FedProx switches on the proximal term.
  TrainerConfig trainer_for(Strategy s, std::uint64_t seed) const {
    TrainerConfig t = trainer;
    t.seed = seed;
    if (s == Strategy::fedprox) t.prox_mu = fedprox_mu;
    return t;
  }
};

// --- JSON -------------------------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const Json& obj, const std::string& where,
                                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
  Json strategies = Json::array();
  for (auto s : c.strategies) strategies.push_back(to_string(s));
  Json schedule = c.preset ? Json{{"preset", *c.preset}}
                           : Json{{"rounds", c.schedule.rounds},
                                  {"local_epochs", c.schedule.local_epochs}};
  return {
      {"federation",
       {{"num_clients", c.federation.num_clients},
        {"split",
         {{"train", c.federation.split.train},
          {"val", c.federation.split.val},
          {"test", c.federation.split.test}}},
        {"feature_dim", c.federation.feature_dim},
        {"num_classes", c.federation.num_classes},
        {"class_separation", c.federation.class_separation},
        {"noise_std", c.federation.noise_std},
        {"heterogeneity",
         {{"label_skew_alpha", c.federation.heterogeneity.label_skew_alpha},
          {"feature_shift_scale", c.federation.heterogeneity.feature_shift_scale}}}}},
      {"model",
       {{"architecture", to_string(c.model.architecture)},
        {"hidden_units", c.model.hidden_units},
        {"init_scale", c.model.init_scale}}},
      {"trainer",
       {{"batch_size", c.trainer.batch_size},
        {"learning_rate", c.trainer.learning_rate},
        {"prox_mu", c.trainer.prox_mu}}},
      {"strategies", strategies},
      {"fedopt",
       {{"variant", to_string(c.fedopt.variant)},
        {"server_lr", c.fedopt.server_lr},
        {"beta1", c.fedopt.beta1},
        {"beta2", c.fedopt.beta2},
        {"tau", c.fedopt.tau},
        {"initial_accumulator", c.fedopt.initial_accumulator},
        {"uniform_weighting", c.fedopt.uniform_weighting}}},
      {"fedprox_mu", c.fedprox_mu},
      {"schedule", schedule},
      {"total_epochs", c.total_epochs ? Json(*c.total_epochs) : Json(nullptr)},
      {"sweep_presets", c.sweep_presets},
      {"scenarios", c.scenarios},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir},
      {"parallelism", c.parallelism},
      {"patience", c.patience},
      {"checkpoint_rounds", c.checkpoint_rounds},
  };
}

// Missing keys keep their defaults; unknown keys are an error.
inline ExperimentConfig config_from_json(const Json& j) {
  using detail::read_opt;
  ExperimentConfig c;
  detail::reject_unknown_keys(j, "config",
                              {"federation", "model", "trainer", "strategies", "fedopt",
                               "fedprox_mu", "schedule", "total_epochs", "sweep_presets",
                               "scenarios", "seeds", "output_dir", "parallelism", "patience",
                               "checkpoint_rounds"});
  if (j.contains("federation")) {
    const auto& f = j.at("federation");
    detail::reject_unknown_keys(f, "federation",
                                {"num_clients", "split", "feature_dim", "num_classes",
                                 "class_separation", "noise_std", "heterogeneity"});
    read_opt(f, "num_clients", c.federation.num_clients, "federation");
    read_opt(f, "feature_dim", c.federation.feature_dim, "federation");
    read_opt(f, "num_classes", c.federation.num_classes, "federation");
    read_opt(f, "class_separation", c.federation.class_separation, "federation");
    read_opt(f, "noise_std", c.federation.noise_std, "federation");
    if (f.contains("split")) {
      const auto& s = f.at("split");
      detail::reject_unknown_keys(s, "federation.split", {"train", "val", "test"});
      read_opt(s, "train", c.federation.split.train, "federation.split");
      read_opt(s, "val", c.federation.split.val, "federation.split");
      read_opt(s, "test", c.federation.split.test, "federation.split");
    }
    if (f.contains("heterogeneity")) {
      const auto& h = f.at("heterogeneity");
      detail::reject_unknown_keys(h, "federation.heterogeneity",
                                  {"label_skew_alpha", "feature_shift_scale"});
      read_opt(h, "label_skew_alpha", c.federation.heterogeneity.label_skew_alpha,
               "federation.heterogeneity");
      read_opt(h, "feature_shift_scale", c.federation.heterogeneity.feature_shift_scale,
               "federation.heterogeneity");
    }
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::reject_unknown_keys(m, "model", {"architecture", "hidden_units", "init_scale"});
    std::string arch = to_string(c.model.architecture);
    read_opt(m, "architecture", arch, "model");
    c.model.architecture = parse_architecture(arch);
    read_opt(m, "hidden_units", c.model.hidden_units, "model");
    read_opt(m, "init_scale", c.model.init_scale, "model");
  }
  if (j.contains("trainer")) {
    const auto& t = j.at("trainer");
    detail::reject_unknown_keys(t, "trainer", {"batch_size", "learning_rate", "prox_mu"});
    read_opt(t, "batch_size", c.trainer.batch_size, "trainer");
    read_opt(t, "learning_rate", c.trainer.learning_rate, "trainer");
    read_opt(t, "prox_mu", c.trainer.prox_mu, "trainer");
  }
  if (j.contains("strategies")) {
    std::vector<std::string> names;
    read_opt(j, "strategies", names, "config");
    c.strategies.clear();
    for (const auto& n : names) c.strategies.push_back(parse_strategy(n));
  }
  if (j.contains("fedopt")) {
    const auto& o = j.at("fedopt");
    detail::reject_unknown_keys(o, "fedopt",
                                {"variant", "server_lr", "beta1", "beta2", "tau",
                                 "initial_accumulator", "uniform_weighting"});
    std::string variant = to_string(c.fedopt.variant);
    read_opt(o, "variant", variant, "fedopt");
    c.fedopt.variant = parse_fedopt_variant(variant);
    read_opt(o, "server_lr", c.fedopt.server_lr, "fedopt");
    read_opt(o, "beta1", c.fedopt.beta1, "fedopt");
    read_opt(o, "beta2", c.fedopt.beta2, "fedopt");
    read_opt(o, "tau", c.fedopt.tau, "fedopt");
    read_opt(o, "initial_accumulator", c.fedopt.initial_accumulator, "fedopt");
    read_opt(o, "uniform_weighting", c.fedopt.uniform_weighting, "fedopt");
  }
  read_opt(j, "fedprox_mu", c.fedprox_mu, "config");
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    detail::reject_unknown_keys(s, "schedule", {"preset", "rounds", "local_epochs"});
    if (s.contains("preset")) {
      if (s.contains("rounds") || s.contains("local_epochs"))
        throw ConfigError("schedule takes either 'preset' or 'rounds'/'local_epochs'");
      std::string name;
      read_opt(s, "preset", name, "schedule");
      find_preset(name);
      c.preset = name;
    } else {
      if (!s.contains("rounds") || !s.contains("local_epochs"))
        throw ConfigError("explicit schedule needs both 'rounds' and 'local_epochs'");
      c.preset.reset();
      read_opt(s, "rounds", c.schedule.rounds, "schedule");
      read_opt(s, "local_epochs", c.schedule.local_epochs, "schedule");
    }
  }
  if (j.contains("total_epochs")) {
    if (j.at("total_epochs").is_null()) {
      c.total_epochs.reset();
    } else {
      int e = 0;
      read_opt(j, "total_epochs", e, "config");
      c.total_epochs = e;
    }
  }
  read_opt(j, "sweep_presets", c.sweep_presets, "config");
  read_opt(j, "scenarios", c.scenarios, "config");
  read_opt(j, "seeds", c.seeds, "config");
  read_opt(j, "output_dir", c.output_dir, "config");
  read_opt(j, "parallelism", c.parallelism, "config");
  read_opt(j, "patience", c.patience, "config");
  read_opt(j, "checkpoint_rounds", c.checkpoint_rounds, "config");
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

// --- scenario drivers -------------------------------------------------------

struct SeedContext {
  std::uint64_t seed;
  TaskModel model;
  Federation federation;
  ParamVector initial;
};

// Repeat seed s drives data generation, weight init and client shuffles.
inline SeedContext make_seed_context(const ExperimentConfig& cfg, std::uint64_t seed) {
  FederationConfig fc = cfg.federation;
  fc.heterogeneity.seed = seed;
  auto model = cfg.make_model();
  auto initial = model.initial_weights(seed, cfg.model.init_scale);
  return {seed, std::move(model), generate_federation(fc), std::move(initial)};
}

inline RunOptions run_options(const ExperimentConfig& cfg,
                              const std::filesystem::path& checkpoint_dir = {}) {
  RunOptions o;
  o.parallelism = cfg.parallelism;
  o.patience = cfg.patience;
  if (cfg.checkpoint_rounds) o.checkpoint_dir = checkpoint_dir;
  return o;
}

inline Json federated_json(const FederationRunResult& r) {
  return {{"test_metric", r.test_metric},
          {"client_test_metrics", r.client_test_metrics},
          {"client_test_average", r.client_test_average},
          {"final_val_metric", r.history.empty() ? 0.0 : r.history.back().val_metric},
          {"rounds_completed", r.history.size()},
          {"epochs_per_client", r.epochs_per_client}};
}

inline Json local_json(const LocalBaselineResult& r) {
  Json clients = Json::array();
  for (const auto& c : r.clients)
    clients.push_back({{"client_id", c.client_id},
                       {"test_metric", c.test_metric},
                       {"own_test_metric", c.own_test_metric},
                       {"epochs", c.epochs}});
  return {{"average_test_metric", r.average_test_metric}, {"clients", clients}};
}

inline Json global_json(const GlobalBaselineResult& r) {
  return {{"test_metric", r.test_metric},
          {"client_test_metrics", r.client_test_metrics},
          {"epochs", r.epochs}};
}

struct RunReport {
  std::filesystem::path directory;
  std::filesystem::path config_path;
  std::filesystem::path rounds_csv;
  std::filesystem::path summary_json;
  // Everything except "timing" is a deterministic function of the config.
  Json summary;
};

namespace detail {

inline std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void log_line(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

}  // namespace detail

// Runs the configured scenarios for every seed. Writes config.json,
// rounds.csv and summary.json into cfg.output_dir once everything finished.
inline RunReport cmd_run(const ExperimentConfig& cfg, const Logger& log = {}) {
  cfg.validate();
  const auto schedule = cfg.resolved_schedule();
  const std::filesystem::path out = cfg.output_dir;
  const std::set<std::string> scenarios(cfg.scenarios.begin(), cfg.scenarios.end());
  const auto K = cfg.federation.num_clients;

  std::string csv = "round,strategy,seed,val_metric,train_loss";
  for (std::size_t k = 1; k <= K; ++k) csv += ",client_" + std::to_string(k);
  csv += ",cumulative_epochs,duration_s\n";

  Json results = Json::array();
  Json timing = Json::array();
  std::map<std::string, std::vector<double>> means;
  for (auto seed : cfg.seeds) {
    auto ctx = make_seed_context(cfg, seed);
    Json entry = {{"seed", seed}};
    Json t = {{"seed", seed}};
    if (scenarios.count("federated")) {
      entry["federated"] = Json::object();
      t["federated"] = Json::object();
      for (auto strategy : cfg.strategies) {
        const auto name = to_string(strategy);
        detail::log_line(log, "seed " + std::to_string(seed) + ": federated " + name);
        auto res = run_federated(
            ctx.model, ctx.federation, AggregatorState::make(strategy, cfg.fedopt), schedule,
            cfg.trainer_for(strategy, seed), ctx.initial,
            run_options(cfg, out / "checkpoints" / (name + "_seed" + std::to_string(seed))));
        for (const auto& rec : res.history) {
          csv += std::to_string(rec.round) + "," + name + "," + std::to_string(seed) + "," +
                 detail::fmt_real(rec.val_metric) + "," + detail::fmt_real(rec.train_loss);
          for (double m : rec.client_metrics) csv += "," + detail::fmt_real(m);
          csv += "," + std::to_string(rec.cumulative_epochs) + "," +
                 detail::fmt_real(rec.duration_s) + "\n";
        }
        entry["federated"][name] = federated_json(res);
        t["federated"][name] = res.duration_s;
        means["federated." + name].push_back(res.test_metric);
      }
    }
    TrainerConfig base = cfg.trainer_for(Strategy::fedavg, seed);
    base.epochs = cfg.baseline_epochs();
    if (scenarios.count("local")) {
      detail::log_line(log, "seed " + std::to_string(seed) + ": local baseline");
      auto res = run_local_baseline(ctx.model, ctx.federation, base, ctx.initial,
                                    run_options(cfg));
      entry["local"] = local_json(res);
      t["local"] = res.duration_s;
      means["local"].push_back(res.average_test_metric);
    }
    if (scenarios.count("global")) {
      detail::log_line(log, "seed " + std::to_string(seed) + ": global baseline");
      auto res = run_global_baseline(ctx.model, ctx.federation, base, ctx.initial);
      entry["global"] = global_json(res);
      t["global"] = res.duration_s;
      means["global"].push_back(res.test_metric);
    }
    results.push_back(entry);
    timing.push_back(t);
  }

  Json mean_json = Json::object();
  for (const auto& [k, v] : means) mean_json[k] = detail::mean(v);

  RunReport rep;
  rep.directory = out;
  rep.config_path = out / "config.json";
  rep.rounds_csv = out / "rounds.csv";
  rep.summary_json = out / "summary.json";
  rep.summary = {{"command", "run"},
                 {"schedule",
                  {{"name", cfg.preset ? Json(*cfg.preset) : Json(nullptr)},
                   {"rounds", schedule.rounds},
                   {"local_epochs", schedule.local_epochs},
                   {"total_epochs", schedule.total_epochs()}}},
                 {"baseline_epochs", cfg.baseline_epochs()},
                 {"results", results},
                 {"mean_test_metric", mean_json},
                 {"files", {{"config", "config.json"}, {"rounds_csv", "rounds.csv"}}},
                 {"timing", {{"unit", "s"}, {"runs", timing}}}};
  write_file_atomic(rep.config_path, to_json(cfg).dump(2) + "\n");
  write_file_atomic(rep.rounds_csv, csv);
  write_file_atomic(rep.summary_json, rep.summary.dump(2) + "\n");
  return rep;
}

struct SweepReport {
  std::filesystem::path directory;
  std::filesystem::path table_csv;
  std::filesystem::path table_json;
  Json table;
};

// Every preset x strategy x seed, plus local/global baselines per seed. The
// table has one row per client, the client average, the Group-All score, the
// local and global baselines, and the mean duration; one column per preset.
inline SweepReport cmd_sweep(const ExperimentConfig& cfg, const Logger& log = {}) {
  cfg.validate();
  const auto K = cfg.federation.num_clients;
  const auto n_presets = cfg.sweep_presets.size();
  const double n_seeds = static_cast<double>(cfg.seeds.size());
  if (n_presets == 0) throw ConfigError("sweep_presets must not be empty");

  struct Cell {
    std::vector<double> clients;
    double average = 0, group_all = 0, duration = 0;
  };
  // [strategy][preset]
  std::vector<std::vector<Cell>> cells(cfg.strategies.size(), std::vector<Cell>(n_presets));
  for (auto& row : cells)
    for (auto& c : row) c.clients.assign(K, 0.0);
  double local_avg = 0, global_avg = 0, local_dur = 0, global_dur = 0;

  for (auto seed : cfg.seeds) {
    auto ctx = make_seed_context(cfg, seed);
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
      const auto strategy = cfg.strategies[s];
      for (std::size_t p = 0; p < n_presets; ++p) {
        detail::log_line(log, "seed " + std::to_string(seed) + ": " + to_string(strategy) +
                                  " " + cfg.sweep_presets[p]);
        auto res = run_federated(ctx.model, ctx.federation,
                                 AggregatorState::make(strategy, cfg.fedopt),
                                 find_preset(cfg.sweep_presets[p]),
                                 cfg.trainer_for(strategy, seed), ctx.initial, run_options(cfg));
        auto& cell = cells[s][p];
        for (std::size_t k = 0; k < K; ++k) cell.clients[k] += res.client_test_metrics[k] / n_seeds;
        cell.average += res.client_test_average / n_seeds;
        cell.group_all += res.test_metric / n_seeds;
        cell.duration += res.duration_s / n_seeds;
      }
    }
    TrainerConfig base = cfg.trainer_for(Strategy::fedavg, seed);
    base.epochs = cfg.baseline_epochs();
    detail::log_line(log, "seed " + std::to_string(seed) + ": baselines");
    auto local = run_local_baseline(ctx.model, ctx.federation, base, ctx.initial, run_options(cfg));
    auto global = run_global_baseline(ctx.model, ctx.federation, base, ctx.initial);
    local_avg += local.average_test_metric / n_seeds;
    global_avg += global.test_metric / n_seeds;
    local_dur += local.duration_s / n_seeds;
    global_dur += global.duration_s / n_seeds;
  }

  std::string csv = "strategy,row";
  for (const auto& p : cfg.sweep_presets) csv += "," + p;
  csv += "\n";
  auto emit_row = [&](const std::string& strategy, const std::string& row, auto&& value) {
    csv += strategy + "," + row;
    for (std::size_t p = 0; p < n_presets; ++p) csv += "," + detail::fmt_real(value(p));
    csv += "\n";
  };

  Json strategies = Json::object();
  for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
    const auto name = to_string(cfg.strategies[s]);
    const auto& row = cells[s];
    Json rows = Json::object();
    for (std::size_t k = 0; k < K; ++k) {
      const auto label = "client_" + std::to_string(k + 1);
      emit_row(name, label, [&](std::size_t p) { return row[p].clients[k]; });
      Json vals = Json::array();
      for (std::size_t p = 0; p < n_presets; ++p) vals.push_back(row[p].clients[k]);
      rows[label] = vals;
    }
    auto add = [&](const std::string& label, auto&& value) {
      emit_row(name, label, value);
      Json vals = Json::array();
      for (std::size_t p = 0; p < n_presets; ++p) vals.push_back(value(p));
      rows[label] = vals;
    };
    add("average", [&](std::size_t p) { return row[p].average; });
    add("group_all", [&](std::size_t p) { return row[p].group_all; });
    add("local", [&](std::size_t) { return local_avg; });
    add("global", [&](std::size_t) { return global_avg; });
    add("duration_s", [&](std::size_t p) { return row[p].duration; });
    strategies[name] = rows;
  }

  SweepReport rep;
  rep.directory = cfg.output_dir;
  rep.table_csv = rep.directory / "sweep.csv";
  rep.table_json = rep.directory / "sweep.json";
  rep.table = {{"command", "sweep"},
               {"columns", cfg.sweep_presets},
               {"seeds", cfg.seeds},
               {"total_epochs", cfg.baseline_epochs()},
               {"strategies", strategies},
               {"baselines",
                {{"local", local_avg},
                 {"global", global_avg},
                 {"local_duration_s", local_dur},
                 {"global_duration_s", global_dur}}}};
  write_file_atomic(rep.directory / "config.json", to_json(cfg).dump(2) + "\n");
  write_file_atomic(rep.table_csv, csv);
  write_file_atomic(rep.table_json, rep.table.dump(2) + "\n");
  return rep;
}

// `which` is "local" or "global".
inline RunReport cmd_baseline(const ExperimentConfig& cfg, const std::string& which,
                              const Logger& log = {}) {
  if (which != "local" && which != "global")
    throw ConfigError("baseline must be 'local' or 'global', got '" + which + "'");
  ExperimentConfig c = cfg;
  c.scenarios = {which};
  return cmd_run(c, log);
}

inline std::filesystem::path cmd_gen_data(const ExperimentConfig& cfg) {
  cfg.validate();
  FederationConfig fc = cfg.federation;
  fc.heterogeneity.seed = cfg.seeds.front();
  const auto fed = generate_federation(fc);
  save_federation(cfg.output_dir, fc, fed);
  return std::filesystem::path(cfg.output_dir) / "manifest.json";
}

inline Json cmd_eval_detections(const std::filesystem::path& gt_path,
                                const std::filesystem::path& det_path, double iou_threshold) {
  const auto gts = detection::parse_ground_truth(read_file(gt_path));
  const auto dets = detection::parse_detections(read_file(det_path));
  const auto at_threshold = detection::evaluate_detections(dets, gts, iou_threshold);
  const auto at_half = detection::evaluate_detections(dets, gts, 0.5);
  return detection::report_to_json(at_threshold, at_half);
}

}  // namespace fedsim
