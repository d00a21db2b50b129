#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "otafl/errors.hpp"

namespace otafl {

enum class TaskKind { linear_regression, mlp_classifier };
enum class EtaMode { fixed, adaptive_diff };
enum class Policy { inflota, random_policy, perfect_aggregation };
enum class Profile { desk, paper };

inline std::string to_string(TaskKind k) {
  return k == TaskKind::linear_regression ? "linear_regression" : "mlp";
}
inline std::string to_string(Policy p) {
  switch (p) {
    case Policy::inflota: return "inflota";
    case Policy::random_policy: return "random";
    default: return "perfect";
  }
}
inline std::string to_string(EtaMode m) {
  return m == EtaMode::fixed ? "fixed" : "adaptive_diff";
}

inline Policy policy_from_string(const std::string& s) {
  if (s == "inflota") return Policy::inflota;
  if (s == "random") return Policy::random_policy;
  if (s == "perfect") return Policy::perfect_aggregation;
  throw ConfigError("unknown policy: " + s);
}

inline TaskKind task_from_string(const std::string& s) {
  if (s == "linear_regression") return TaskKind::linear_regression;
  if (s == "mlp") return TaskKind::mlp_classifier;
  throw ConfigError("unknown task: " + s);
}

// Scaling-margin eta: either a fixed constant, or per-entry |w_{t-1} - w_{t-2}|
// with `value` as the fallback before any history exists.
struct EtaConfig {
  EtaMode mode = EtaMode::adaptive_diff;
  double value = 0.1;
};

struct ScenarioConfig {
  TaskKind task = TaskKind::linear_regression;
  int num_workers = 20;          // U
  int model_dim = 0;             // D; 0 -> derived from task
  double max_power_mw = 10.0;    // P_i^Max, linear milliwatts, same for all i
  double noise_variance_mw = 1e-4;  // sigma^2, linear milliwatts
  double learning_rate = 0.01;   // alpha
  int num_iterations = 1500;     // T
  double lipschitz = 1.0;        // L
  double strong_convexity = 0.1; // mu
  double grad_bound_rho1 = 1.0;  // rho_1
  double grad_bound_rho2 = 0.0;  // rho_2; 0 -> default 1/D
  EtaConfig eta;
  Policy policy = Policy::inflota;
  std::uint64_t rng_seed = 1;
  bool certify_convergence = false;

  // Data volume. Synthetic regression: per-worker sample-count range.
  // MNIST-style: pooled total range by default, per-worker when
  // samples_per_worker is set.
  std::int64_t samples_min = 50;
  std::int64_t samples_max = 100;
  bool samples_per_worker = false;
  std::int64_t test_samples = 1000;  // held-out synthetic test size

  // Channel options.
  bool gains_constant_across_entries = false;
  double b_ceiling = 1e6;  // scaling cap for degenerate entries

  // Orchestration.
  int eval_interval = 5;       // test-metric cadence (classifier)
  double nonconvex_G = 0.0;    // script-G for the nonconvex flag; 0 -> 2*mu
  bool record_trajectory = false;

  int dim() const {
    if (model_dim > 0) return model_dim;
    return task == TaskKind::linear_regression ? 2 : 50890;
  }
  double rho2() const {
    return grad_bound_rho2 > 0.0 ? grad_bound_rho2 : 1.0 / dim();
  }
  double nonconvex_g() const {
    return nonconvex_G > 0.0 ? nonconvex_G : 2.0 * strong_convexity;
  }
};

// Names every violated constraint; empty result means the config is valid.
inline std::vector<std::string> validate_config(const ScenarioConfig& cfg) {
  std::vector<std::string> errs;
  if (cfg.num_workers <= 0) errs.push_back("num_workers must be positive");
  if (cfg.dim() <= 0) errs.push_back("model_dim must be positive");
  if (cfg.num_iterations <= 0) errs.push_back("num_iterations must be positive");
  if (cfg.learning_rate <= 0.0) errs.push_back("learning_rate must be positive");
  if (cfg.lipschitz <= 0.0) errs.push_back("lipschitz must be positive");
  if (cfg.strong_convexity <= 0.0)
    errs.push_back("strong_convexity must be positive");
  if (cfg.strong_convexity > cfg.lipschitz)
    errs.push_back("mu <= L violated");
  if (cfg.max_power_mw <= 0.0) errs.push_back("max_power_mw must be positive");
  if (cfg.noise_variance_mw < 0.0)
    errs.push_back("noise_variance_mw must be nonnegative");
  if (cfg.grad_bound_rho1 < 0.0) errs.push_back("rho1 must be nonnegative");
  if (cfg.grad_bound_rho2 < 0.0) errs.push_back("rho2 must be nonnegative");
  if (cfg.certify_convergence) {
    const double r2 = cfg.rho2();
    if (!(r2 > 0.0 && r2 <= 1.0 / cfg.dim()))
      errs.push_back("rho2 <= 1/D violated");
  }
  if (cfg.model_dim > 0) {
    const int expected =
        cfg.task == TaskKind::linear_regression ? 2 : 50890;
    if (cfg.model_dim != expected)
      errs.push_back("model_dim inconsistent with task");
  }
  if (cfg.samples_min <= 0 || cfg.samples_max < cfg.samples_min)
    errs.push_back("samples range must satisfy 0 < min <= max");
  if (cfg.eta.value < 0.0) errs.push_back("eta value must be nonnegative");
  if (cfg.b_ceiling <= 0.0) errs.push_back("b_ceiling must be positive");
  if (cfg.eval_interval <= 0) errs.push_back("eval_interval must be positive");
  return errs;
}

inline void require_valid(const ScenarioConfig& cfg) {
  const auto errs = validate_config(cfg);
  if (errs.empty()) return;
  std::string msg = "invalid config:";
  for (const auto& e : errs) msg += "\n  - " + e;
  throw ConfigError(msg);
}

namespace detail {

template <typename T>
T require_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key))
    throw ConfigError(std::string("missing config field: ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config field '") + key + "': " +
                      e.what());
  }
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config field '") + key + "': " +
                      e.what());
  }
}

}  // namespace detail

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  ScenarioConfig cfg;
  cfg.task = task_from_string(detail::require_field<std::string>(j, "task"));
  cfg.num_workers = detail::require_field<int>(j, "num_workers");
  cfg.max_power_mw = detail::require_field<double>(j, "max_power_mw");
  cfg.noise_variance_mw = detail::require_field<double>(j, "noise_variance_mw");
  cfg.learning_rate = detail::require_field<double>(j, "learning_rate");
  cfg.num_iterations = detail::require_field<int>(j, "num_iterations");
  cfg.policy =
      policy_from_string(detail::require_field<std::string>(j, "policy"));
  cfg.rng_seed = detail::require_field<std::uint64_t>(j, "rng_seed");

  detail::read_optional(j, "model_dim", cfg.model_dim);
  detail::read_optional(j, "lipschitz", cfg.lipschitz);
  detail::read_optional(j, "strong_convexity", cfg.strong_convexity);
  detail::read_optional(j, "grad_bound_rho1", cfg.grad_bound_rho1);
  detail::read_optional(j, "grad_bound_rho2", cfg.grad_bound_rho2);
  detail::read_optional(j, "certify_convergence", cfg.certify_convergence);
  detail::read_optional(j, "samples_min", cfg.samples_min);
  detail::read_optional(j, "samples_max", cfg.samples_max);
  detail::read_optional(j, "samples_per_worker", cfg.samples_per_worker);
  detail::read_optional(j, "test_samples", cfg.test_samples);
  detail::read_optional(j, "gains_constant_across_entries",
                        cfg.gains_constant_across_entries);
  detail::read_optional(j, "b_ceiling", cfg.b_ceiling);
  detail::read_optional(j, "eval_interval", cfg.eval_interval);
  detail::read_optional(j, "nonconvex_G", cfg.nonconvex_G);
  detail::read_optional(j, "record_trajectory", cfg.record_trajectory);
  if (j.contains("batch_mode")) {
    const auto mode = j.at("batch_mode").get<std::string>();
    if (mode != "full")
      throw ConfigError("batch_mode is fixed to \"full\", got: " + mode);
  }
  if (j.contains("eta")) {
    const auto& e = j.at("eta");
    const auto mode = detail::require_field<std::string>(e, "mode");
    if (mode == "fixed") cfg.eta.mode = EtaMode::fixed;
    else if (mode == "adaptive_diff") cfg.eta.mode = EtaMode::adaptive_diff;
    else throw ConfigError("unknown eta mode: " + mode);
    detail::read_optional(e, "value", cfg.eta.value);
  }
  return cfg;
}

inline nlohmann::json config_to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["task"] = to_string(cfg.task);
  j["num_workers"] = cfg.num_workers;
  j["model_dim"] = cfg.dim();
  j["max_power_mw"] = cfg.max_power_mw;
  j["noise_variance_mw"] = cfg.noise_variance_mw;
  j["learning_rate"] = cfg.learning_rate;
  j["num_iterations"] = cfg.num_iterations;
  j["lipschitz"] = cfg.lipschitz;
  j["strong_convexity"] = cfg.strong_convexity;
  j["grad_bound_rho1"] = cfg.grad_bound_rho1;
  j["grad_bound_rho2"] = cfg.rho2();
  j["eta"] = {{"mode", to_string(cfg.eta.mode)}, {"value", cfg.eta.value}};
  j["policy"] = to_string(cfg.policy);
  j["rng_seed"] = cfg.rng_seed;
  j["certify_convergence"] = cfg.certify_convergence;
  j["samples_min"] = cfg.samples_min;
  j["samples_max"] = cfg.samples_max;
  j["samples_per_worker"] = cfg.samples_per_worker;
  j["test_samples"] = cfg.test_samples;
  j["gains_constant_across_entries"] = cfg.gains_constant_across_entries;
  j["b_ceiling"] = cfg.b_ceiling;
  j["eval_interval"] = cfg.eval_interval;
  j["nonconvex_G"] = cfg.nonconvex_g();
  j["batch_mode"] = "full";
  return j;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " +
                      e.what());
  }
  return config_from_json(j);
}

}  // namespace otafl
