// fedsim command-line entry point.
//
// Exit codes: 0 success, 1 unexpected failure, 2 invalid config or input,
// 3 training diverged, 4 I/O error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedsim/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

// FEDSIM_LOG=quiet silences progress lines; anything else (default "info")
// prints them to stderr.
fedsim::Logger make_logger() {
  const char* level = std::getenv("FEDSIM_LOG");
  if (level && std::string(level) == "quiet") return {};
  return [](const std::string& msg) { std::cerr << "[fedsim] " << msg << "\n"; };
}

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::string strategy;
};

fedsim::ExperimentConfig resolve_config(const Overrides& o, bool preset_is_sweep) {
  fedsim::ExperimentConfig cfg;
  if (!o.config.empty()) cfg = fedsim::load_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) cfg.seeds = {*o.seed};
  if (!o.preset.empty()) {
    fedsim::find_preset(o.preset);
    if (preset_is_sweep) {
      cfg.sweep_presets = {o.preset};
    } else {
      cfg.preset = o.preset;
    }
  }
  if (!o.strategy.empty()) cfg.strategies = {fedsim::parse_strategy(o.strategy)};
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--out", o.out, "Output directory (overrides output_dir)");
  cmd->add_option("--seed", o.seed, "Run a single seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator and detection-metrics evaluator"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, base_o, gen_o;
  auto* run = app.add_subcommand("run", "Run the configured scenarios for every seed");
  add_common(run, run_o);
  run->add_option("--preset", run_o.preset, "Schedule preset (Opt-1..Opt-4)");
  run->add_option("--strategy", run_o.strategy, "fedavg|fedprox|fedopt|fedmedian");

  auto* sweep = app.add_subcommand("sweep", "Compare schedule presets at a fixed epoch budget");
  add_common(sweep, sweep_o);
  sweep->add_option("--preset", sweep_o.preset, "Restrict the sweep to one preset");
  sweep->add_option("--strategy", sweep_o.strategy, "Restrict the sweep to one strategy");

  std::string which;
  auto* baseline = app.add_subcommand("baseline", "Local or global (pooled) training baseline");
  add_common(baseline, base_o);
  baseline->add_option("which", which, "local|global")
      ->required()
      ->check(CLI::IsMember({"local", "global"}));

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic federation to disk");
  add_common(gen, gen_o);

  std::string gt_path, det_path, eval_out;
  double iou_threshold = 0.5;
  auto* eval = app.add_subcommand("eval-detections", "Score detections against ground truth");
  eval->add_option("--gt", gt_path, "Ground-truth boxes file")->required();
  eval->add_option("--det", det_path, "Detections file")->required();
  eval->add_option("--iou-threshold", iou_threshold, "IoU threshold for a match")
      ->check(CLI::Range(0.0, 1.0));
  eval->add_option("--out", eval_out, "Also write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const auto log = make_logger();
  try {
    if (*run) {
      auto rep = fedsim::cmd_run(resolve_config(run_o, false), log);
      std::cout << rep.summary_json.string() << "\n";
    } else if (*sweep) {
      auto rep = fedsim::cmd_sweep(resolve_config(sweep_o, true), log);
      std::cout << rep.table_csv.string() << "\n";
    } else if (*baseline) {
      auto rep = fedsim::cmd_baseline(resolve_config(base_o, false), which, log);
      std::cout << rep.summary_json.string() << "\n";
    } else if (*gen) {
      std::cout << fedsim::cmd_gen_data(resolve_config(gen_o, false)).string() << "\n";
    } else if (*eval) {
      const auto report = fedsim::cmd_eval_detections(gt_path, det_path, iou_threshold);
      if (!eval_out.empty()) fedsim::write_file_atomic(eval_out, report.dump(2) + "\n");
      std::cout << report.dump(2) << "\n";
    }
  } catch (const fedsim::DivergenceError& e) {
    std::cerr << "fedsim: training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const fedsim::IoError& e) {
    std::cerr << "fedsim: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "fedsim: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fedsim::ConfigError& e) {
    std::cerr << "fedsim: invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fedsim::ValidationError& e) {
    std::cerr << "fedsim: invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fedsim::UndefinedMetricError& e) {
    std::cerr << "fedsim: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "fedsim: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
