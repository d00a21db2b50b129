// Command-line front end: single runs, one-axis sweeps, scheduler
// validation against the exhaustive oracle, and bound-trace recomputation
// from stored run artifacts.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "otafl/otafl.hpp"

namespace {

using namespace otafl;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitParse = 4;

struct RunOptions {
  std::string config_path;
  std::string out_dir = "out/run";
  std::string policy;
  std::string profile = "desk";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool svg = false;
  MnistPaths mnist;
};

ScenarioConfig load_run_config(const RunOptions& opt) {
  ScenarioConfig cfg = load_config(opt.config_path);
  if (opt.seed_set) cfg.rng_seed = opt.seed;
  if (!opt.policy.empty()) cfg.policy = policy_from_string(opt.policy);
  if (opt.profile == "paper") {
    if (cfg.task == TaskKind::mlp_classifier) {
      cfg.num_iterations = std::max(cfg.num_iterations, 500);
      cfg.eval_interval = 10;
    } else {
      cfg.num_iterations = std::max(cfg.num_iterations, 3000);
    }
  } else if (opt.profile != "desk") {
    throw ConfigError("profile must be desk or paper");
  }
  require_valid(cfg);
  return cfg;
}

int cmd_run(const RunOptions& opt) {
  const ScenarioConfig cfg = load_run_config(opt);
  const RunResult res = run_experiment(cfg, opt.mnist);
  emit_reports(res, opt.out_dir, opt.svg);
  std::cout << "policy=" << to_string(cfg.policy) << " seed=" << cfg.rng_seed
            << " iterations=" << cfg.num_iterations << "\n"
            << "final_train_loss=" << fmt_double(res.final_train_loss);
  if (res.final_test_mse)
    std::cout << " final_test_mse=" << fmt_double(*res.final_test_mse);
  if (res.final_test_accuracy)
    std::cout << " final_test_accuracy="
              << fmt_double(*res.final_test_accuracy);
  std::cout << "\nreports written to " << opt.out_dir << "\n";
  return kExitOk;
}

int cmd_sweep(const RunOptions& opt, const std::string& axis_name,
              const std::vector<double>& values,
              const std::vector<std::string>& policy_names, int seeds) {
  ScenarioConfig cfg = load_run_config(opt);
  SweepAxis axis;
  if (axis_name == "workers") axis = SweepAxis::workers;
  else if (axis_name == "noise") axis = SweepAxis::noise;
  else if (axis_name == "samples") axis = SweepAxis::samples;
  else throw ConfigError("sweep axis must be workers, noise, or samples");
  if (values.empty()) throw ConfigError("sweep needs at least one value");

  std::vector<Policy> policies;
  if (policy_names.empty()) {
    policies = {Policy::perfect_aggregation, Policy::inflota,
                Policy::random_policy};
  } else {
    for (const auto& name : policy_names)
      policies.push_back(policy_from_string(name));
  }
  const auto points = run_sweep(cfg, axis, values, policies, seeds, opt.mnist);
  const auto csv =
      std::filesystem::path(opt.out_dir) / ("sweep_" + axis_name + ".csv");
  write_sweep_csv(csv, axis, points);
  for (const auto& p : points) {
    std::cout << axis_name << "=" << fmt_double(p.axis_value)
              << " policy=" << to_string(p.policy)
              << " mean_final_loss=" << fmt_double(p.mean_final_loss)
              << " mean_final_test_metric="
              << fmt_double(p.mean_final_test_metric) << "\n";
  }
  std::cout << "sweep table written to " << csv.string() << "\n";
  return kExitOk;
}

int cmd_oracle_check(int instances, int min_workers, int max_workers,
                     std::uint64_t seed) {
  if (min_workers < 1 || max_workers < min_workers || max_workers > 20)
    throw ConfigError("worker range must satisfy 1 <= min <= max <= 20");
  const auto res = oracle_check(instances, min_workers, max_workers, seed);
  std::cout << "instances=" << res.total << " pass="
            << (res.total - res.mismatches) << " fail=" << res.mismatches
            << "\n";
  if (res.mismatches > 0) {
    std::cout << "max objective difference=" << fmt_double(res.max_abs_diff)
              << "\n";
    return kExitError;
  }
  return kExitOk;
}

int cmd_bounds(const std::string& run_dir) {
  const auto trace = recompute_bound_trace(run_dir);
  std::cout << "recomputed " << trace.size() << " bound rows\n"
            << "wrote "
            << (std::filesystem::path(run_dir) / "bound_trace_recomputed.csv")
                   .string()
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "federated learning over an analog-aggregation wireless channel"};
  app.require_subcommand(1);

  RunOptions opt;
  std::string axis_name = "workers";
  std::vector<double> values;
  std::vector<std::string> policy_names;
  int seeds = 5;
  int instances = 1000;
  int min_workers = 2;
  int max_workers = 12;
  std::uint64_t oracle_seed = 7;
  std::string run_dir;

  const auto add_common = [&](CLI::App* cmd, bool with_out) {
    cmd->add_option("--config", opt.config_path, "scenario config (json)")
        ->required();
    cmd->add_option("--seed", opt.seed, "override the config rng seed")
        ->each([&](const std::string&) { opt.seed_set = true; });
    cmd->add_option("--policy", opt.policy,
                    "override policy: inflota|random|perfect");
    cmd->add_option("--profile", opt.profile, "desk (default) or paper");
    if (with_out)
      cmd->add_option("--out-dir", opt.out_dir, "report output directory");
    cmd->add_option("--mnist-images", opt.mnist.train_images,
                    "training images idx file");
    cmd->add_option("--mnist-labels", opt.mnist.train_labels,
                    "training labels idx file");
    cmd->add_option("--mnist-test-images", opt.mnist.test_images,
                    "test images idx file");
    cmd->add_option("--mnist-test-labels", opt.mnist.test_labels,
                    "test labels idx file");
  };

  auto* run = app.add_subcommand("run", "run one scenario");
  add_common(run, true);
  run->add_flag("--svg", opt.svg, "emit a loss-curve svg");

  auto* sweep = app.add_subcommand("sweep", "vary one config axis");
  add_common(sweep, true);
  sweep->add_option("--axis", axis_name, "workers|noise|samples")->required();
  sweep->add_option("--values", values, "axis values")->required();
  sweep->add_option("--seeds", seeds, "seeds per point");
  sweep->add_option("--policies", policy_names,
                    "subset of inflota,random,perfect (default all)");

  auto* oracle = app.add_subcommand(
      "oracle-check", "line-search scheduler vs exhaustive oracle");
  oracle->add_option("--instances", instances, "random instances");
  oracle->add_option("--min-workers", min_workers, "smallest U");
  oracle->add_option("--max-workers", max_workers, "largest U (<= 20)");
  oracle->add_option("--seed", oracle_seed, "instance generator seed");

  auto* bounds = app.add_subcommand(
      "bounds", "recompute the bound trace of a stored run");
  bounds->add_option("--run-dir", run_dir, "directory written by `run`")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(opt);
    if (sweep->parsed())
      return cmd_sweep(opt, axis_name, values, policy_names, seeds);
    if (oracle->parsed())
      return cmd_oracle_check(instances, min_workers, max_workers,
                              oracle_seed);
    if (bounds->parsed()) return cmd_bounds(run_dir);
  } catch (const otafl::IdxError& e) {
    std::cerr << "idx parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const otafl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const otafl::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}
