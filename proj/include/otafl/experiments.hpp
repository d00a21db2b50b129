#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "otafl/bounds.hpp"
#include "otafl/channel.hpp"
#include "otafl/config.hpp"
#include "otafl/data.hpp"
#include "otafl/errors.hpp"
#include "otafl/learning.hpp"
#include "otafl/report.hpp"
#include "otafl/rng.hpp"
#include "otafl/scheduler.hpp"

namespace otafl {

struct MnistPaths {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;

  bool has_train() const {
    return !train_images.empty() && !train_labels.empty();
  }
  bool has_test() const {
    return !test_images.empty() && !test_labels.empty();
  }
};

// Everything a run consumes: per-worker profiles, the pooled training view,
// and a held-out test set.
struct DataBundle {
  TaskModel task;
  std::vector<WorkerProfile> workers;
  Dataset pooled;
  Dataset test;
  std::vector<std::int64_t> counts;  // K_i
  double total_samples = 0.0;        // K
  std::optional<LeastSquaresFit> optimum;  // regression closed form
};

namespace detail {

inline Dataset concat(const std::vector<Dataset>& parts) {
  Dataset out;
  if (parts.empty()) return out;
  out.in_dim = parts[0].in_dim;
  out.out_dim = parts[0].out_dim;
  for (const auto& p : parts) {
    out.n += p.n;
    out.inputs.insert(out.inputs.end(), p.inputs.begin(), p.inputs.end());
    out.targets.insert(out.targets.end(), p.targets.begin(), p.targets.end());
  }
  return out;
}

}  // namespace detail

// Stream-iteration indices reserved for non-per-round draws. Worker i's
// synthetic data comes from its own substream so that adding workers or
// samples never disturbs the draws of the others (common random numbers
// across sweep points).
inline constexpr std::uint64_t kDataGenIteration = 0;
inline constexpr std::uint64_t kModelInitIteration = 1;
inline constexpr std::uint64_t kTestGenIteration = 2;
inline constexpr std::uint64_t kWorkerDataStreamBase = 16;

inline DataBundle prepare_data(const ScenarioConfig& cfg,
                               const MnistPaths& mnist = {}) {
  RngStreams streams(cfg.rng_seed);
  DataBundle bundle;
  bundle.task = TaskModel::for_kind(cfg.task);

  std::vector<Dataset> per_worker;
  if (cfg.task == TaskKind::linear_regression) {
    SyntheticRegressionSpec spec;
    spec.samples_min = cfg.samples_min;
    spec.samples_max = cfg.samples_max;
    per_worker.reserve(static_cast<std::size_t>(cfg.num_workers));
    for (int i = 0; i < cfg.num_workers; ++i) {
      Rng worker_rng = streams.stream(
          "data", kWorkerDataStreamBase + static_cast<std::uint64_t>(i));
      // one uniform mapped onto the range, so a worker keeps its relative
      // data volume when the range is swept
      const double u = worker_rng.uniform01();
      const auto k = static_cast<std::int64_t>(
          spec.samples_min +
          std::floor(u * static_cast<double>(spec.samples_max -
                                             spec.samples_min + 1)));
      per_worker.push_back(gen_synthetic_pool(
          spec, std::min(k, spec.samples_max), worker_rng));
    }
    Rng test_rng = streams.stream("data", kTestGenIteration);
    bundle.test = gen_synthetic_pool(spec, cfg.test_samples, test_rng);
  } else {
    if (!mnist.has_train())
      throw ConfigError("classifier task needs image/label idx files");
    const IdxFile images = load_idx(mnist.train_images);
    const IdxFile labels = load_idx(mnist.train_labels);
    Rng data_rng = streams.stream("data", kDataGenIteration);
    MnistSplit split =
        partition_mnist(images, labels, cfg.num_workers, cfg.samples_min,
                        cfg.samples_max, cfg.samples_per_worker, data_rng);
    per_worker = std::move(split.worker_data);
    if (mnist.has_test()) {
      const IdxFile timg = load_idx(mnist.test_images);
      const IdxFile tlab = load_idx(mnist.test_labels);
      std::vector<std::int64_t> all(timg.count());
      std::iota(all.begin(), all.end(), std::int64_t{0});
      bundle.test = make_image_dataset(timg, tlab, all);
    } else {
      // Hold out unassigned training samples as the test split.
      std::vector<bool> used(images.count(), false);
      for (const auto& slot : split.partition.assignment)
        for (auto idx : slot) used[static_cast<std::size_t>(idx)] = true;
      std::vector<std::int64_t> rest;
      for (std::size_t k = 0; k < used.size(); ++k)
        if (!used[k]) rest.push_back(static_cast<std::int64_t>(k));
      if (rest.size() > static_cast<std::size_t>(cfg.test_samples))
        rest.resize(static_cast<std::size_t>(cfg.test_samples));
      if (rest.empty())
        throw ConfigError("no samples left for a held-out test split");
      bundle.test = make_image_dataset(images, labels, rest);
    }
  }

  bundle.workers.reserve(per_worker.size());
  for (std::size_t i = 0; i < per_worker.size(); ++i) {
    WorkerProfile w;
    w.id = static_cast<int>(i) + 1;
    w.sample_count = static_cast<std::int64_t>(per_worker[i].n);
    w.max_power_mw = cfg.max_power_mw;
    w.data = std::move(per_worker[i]);
    bundle.counts.push_back(w.sample_count);
    bundle.total_samples += static_cast<double>(w.sample_count);
    bundle.workers.push_back(std::move(w));
  }
  std::vector<Dataset> views;
  views.reserve(bundle.workers.size());
  for (const auto& w : bundle.workers) views.push_back(w.data);
  bundle.pooled = detail::concat(views);
  if (cfg.task == TaskKind::linear_regression)
    bundle.optimum = least_squares_fit(bundle.pooled);
  return bundle;
}

struct MetricRecord {
  int t = 0;
  double loss = 0.0;
  std::optional<double> accuracy;
  double selected_mean = 0.0;  // mean over entries of the selected count
  double b_mean = 0.0;
  double a_t = 0.0;
  double b_t = 0.0;
  bool b_unbounded = false;
  double wall_clock_s = 0.0;
};

// Sufficient statistics to rebuild the bound coefficients of one iteration.
struct BoundInputsRecord {
  int t = 0;
  double inv_sq_mass = 0.0;
  std::vector<std::int64_t> deselect_counts;
};

// One federated round: local updates from the broadcast model, a scheduling
// decision per entry, bounded transmissions over the faded MAC, and the PS
// estimate that becomes the next global model. The perfect-aggregation
// baseline swaps the uplink for the error-free weighted average.
class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, const DataBundle& data)
      : cfg_(cfg),
        data_(&data),
        streams_(cfg.rng_seed),
        dim_(static_cast<std::size_t>(cfg.dim())),
        num_workers_(static_cast<std::size_t>(cfg.num_workers)),
        powers_(num_workers_, cfg.max_power_mw),
        start_(std::chrono::steady_clock::now()) {
    require_valid(cfg);
    if (data.workers.size() != num_workers_)
      throw ShapeError("data bundle does not match num_workers");
    if (data.task.dim() != cfg.dim())
      throw ShapeError("task dimension does not match config");
    if (cfg.task == TaskKind::linear_regression) {
      global_.assign(dim_, 0.0);
    } else {
      Rng init_rng = streams_.stream("data", kModelInitIteration);
      global_ = init_model(data.task, init_rng);
    }
    prev_global_ = global_;
    eta_.assign(dim_, 0.0);
    locals_.assign(num_workers_, ModelParams(dim_, 0.0));
    amplitudes_.assign(num_workers_ * dim_, 0.0);
    gain_col_.assign(num_workers_, 0.0);
    if (cfg.record_trajectory) trajectory_.push_back(global_);
  }

  int iteration() const { return t_; }
  const ModelParams& global() const { return global_; }
  const std::vector<ModelParams>& trajectory() const { return trajectory_; }
  const std::vector<BoundInputsRecord>& bound_inputs() const {
    return bound_inputs_;
  }

  MetricRecord step() {
    if (t_ >= cfg_.num_iterations)
      throw ConfigError("run already finished");
    ++t_;

    for (std::size_t i = 0; i < num_workers_; ++i)
      locals_[i] = local_update(global_, data_->task,
                                data_->workers[i].data, cfg_.learning_rate);

    MetricRecord rec;
    rec.t = t_;
    BoundInputsRecord binputs;
    binputs.t = t_;
    binputs.deselect_counts.assign(num_workers_, 0);

    ModelParams next;
    if (cfg_.policy == Policy::perfect_aggregation) {
      next = ideal_global_aggregate(locals_, data_->counts);
      rec.selected_mean = static_cast<double>(num_workers_);
      rec.b_mean = 0.0;
      binputs.inv_sq_mass = 0.0;
    } else {
      next = impaired_round(rec, binputs);
    }
    for (double v : next)
      if (!std::isfinite(v)) throw Error("non-finite global model entry");

    rec.a_t = coeff_A_from_counts(binputs.deselect_counts, data_->counts,
                                  data_->total_samples, cfg_.lipschitz,
                                  cfg_.strong_convexity, cfg_.rho2());
    const BoundCoeffB b = coeff_B_from_stats(
        binputs.inv_sq_mass, binputs.deselect_counts, data_->counts,
        data_->total_samples, cfg_.lipschitz, cfg_.noise_variance_mw,
        cfg_.grad_bound_rho1);
    rec.b_t = b.value;
    rec.b_unbounded = b.unbounded;

    prev_global_ = std::move(global_);
    global_ = std::move(next);
    if (cfg_.record_trajectory) trajectory_.push_back(global_);

    rec.loss = local_loss(global_, data_->task, data_->pooled);
    if (cfg_.task == TaskKind::mlp_classifier &&
        (t_ % cfg_.eval_interval == 0 || t_ == cfg_.num_iterations)) {
      rec.accuracy = classification_accuracy(global_, data_->task, data_->test);
    }
    rec.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start_)
            .count();
    bound_inputs_.push_back(binputs);
    return rec;
  }

 private:
  ModelParams impaired_round(MetricRecord& rec, BoundInputsRecord& binputs) {
    Rng channel_rng =
        streams_.stream("channel", static_cast<std::uint64_t>(t_));
    const ChannelRealization channel = draw_channel(
        num_workers_, dim_, cfg_.noise_variance_mw, channel_rng,
        cfg_.gains_constant_across_entries);

    const bool have_history = t_ >= 2;
    for (std::size_t d = 0; d < dim_; ++d)
      eta_[d] =
          compute_eta(cfg_.eta, global_[d], prev_global_[d], have_history);

    SchedulingDecision decision;
    decision.num_workers = num_workers_;
    decision.dim = dim_;
    decision.scaling.assign(dim_, 0.0);
    decision.selection.assign(num_workers_ * dim_, 0);

    if (cfg_.policy == Policy::inflota) {
      FeasiblePoint fp;
      detail::SchedulerScratch scratch;
      for (std::size_t d = 0; d < dim_; ++d) {
        const SchedulerInput in = scheduler_input(d, channel);
        solve_p4(in, fp, scratch);
        decision.scaling[d] = fp.b;
        for (std::size_t i = 0; i < num_workers_; ++i)
          decision.selected(i, d) = fp.beta[i];
      }
    } else {
      Rng policy_rng =
          streams_.stream("policy", static_cast<std::uint64_t>(t_));
      random_decision(channel, policy_rng, decision);
    }

    // Bounded transmissions; the clamp keeps every amplitude within the cap.
    for (std::size_t i = 0; i < num_workers_; ++i) {
      const double k_i = static_cast<double>(data_->counts[i]);
      const double p_max = powers_[i];
      const double cap = p_max * (1.0 + 1e-9);
      double* amp_row = amplitudes_.data() + i * dim_;
      const ModelParams& local = locals_[i];
      for (std::size_t d = 0; d < dim_; ++d) {
        const double a =
            transmit_amplitude(local[d], k_i, decision.scaling[d],
                               channel.gain(i, d), decision.selected(i, d),
                               p_max);
        if (a * a > cap) throw ChannelError("power cap violated");
        amp_row[d] = a;
      }
    }

    Rng noise_rng = streams_.stream("noise", static_cast<std::uint64_t>(t_));
    const ReceivedSignal y = superpose(amplitudes_, channel, noise_rng);
    ModelParams next = ps_estimate(y, decision, data_->counts);

    double selected = 0.0;
    for (std::size_t i = 0; i < num_workers_; ++i) {
      std::int64_t deselected = 0;
      const std::uint8_t* row = decision.selection.data() + i * dim_;
      for (std::size_t d = 0; d < dim_; ++d) {
        if (row[d]) selected += 1.0;
        else ++deselected;
      }
      binputs.deselect_counts[i] = deselected;
    }
    rec.selected_mean = selected / static_cast<double>(dim_);
    double b_sum = 0.0;
    for (double b : decision.scaling) b_sum += b;
    rec.b_mean = b_sum / static_cast<double>(dim_);
    const auto mass = inverse_square_mass(decision, data_->counts);
    binputs.inv_sq_mass = mass.value_or(0.0);
    if (!mass) throw AggregationError("all workers deselected for an entry");
    return next;
  }

  SchedulerInput scheduler_input(std::size_t d,
                                 const ChannelRealization& channel) {
    for (std::size_t i = 0; i < num_workers_; ++i)
      gain_col_[i] = channel.gain(i, d);
    SchedulerInput in;
    in.prev_global_entry = global_[d];
    in.eta = eta_[d];
    in.gains = gain_col_;
    in.sample_counts = data_->counts;
    in.max_powers_mw = powers_;
    in.lipschitz = cfg_.lipschitz;
    in.noise_variance = cfg_.noise_variance_mw;
    in.rho1 = cfg_.grad_bound_rho1;
    in.total_samples = data_->total_samples;
    in.b_ceiling = cfg_.b_ceiling;
    return in;
  }

  // Benchmark policy: uniform nonempty selection per entry and a scaling
  // factor uniform on (0, b_cap], where b_cap is the largest scaling every
  // selected worker can serve.
  void random_decision(const ChannelRealization& channel, Rng& policy_rng,
                       SchedulingDecision& decision) {
    if (num_workers_ > 63)
      throw ConfigError("random policy supports at most 63 workers");
    const std::uint64_t full = (std::uint64_t{1} << num_workers_) - 1;
    for (std::size_t d = 0; d < dim_; ++d) {
      std::uint64_t mask = 0;
      while (mask == 0) mask = policy_rng.raw() & full;
      const SchedulerInput in = scheduler_input(d, channel);
      const double margin = std::abs(in.prev_global_entry) + in.eta;
      double b_cap = cfg_.b_ceiling;
      if (margin > 0.0) {
        b_cap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < num_workers_; ++i)
          if ((mask >> i) & 1) b_cap = std::min(b_cap, max_scaling(i, in));
      }
      decision.scaling[d] = (1.0 - policy_rng.uniform01()) * b_cap;
      for (std::size_t i = 0; i < num_workers_; ++i)
        decision.selected(i, d) = (mask >> i) & 1;
    }
  }

  ScenarioConfig cfg_;
  const DataBundle* data_;
  RngStreams streams_;
  std::size_t dim_;
  std::size_t num_workers_;
  std::vector<double> powers_;
  int t_ = 0;
  ModelParams global_;
  ModelParams prev_global_;
  std::vector<double> eta_;
  std::vector<ModelParams> locals_;
  std::vector<double> amplitudes_;
  std::vector<double> gain_col_;
  std::vector<ModelParams> trajectory_;
  std::vector<BoundInputsRecord> bound_inputs_;
  std::chrono::steady_clock::time_point start_;
};

struct RunResult {
  ScenarioConfig cfg;
  std::vector<MetricRecord> metrics;
  std::vector<BoundInputsRecord> bound_inputs;
  BoundTrace bound_trace;
  ModelParams final_model;
  std::vector<std::int64_t> worker_counts;
  double total_samples = 0.0;
  double initial_loss = 0.0;
  double final_train_loss = 0.0;
  std::optional<double> final_test_mse;
  std::optional<double> final_test_accuracy;
  std::optional<LeastSquaresFit> optimum;
  std::vector<ModelParams> trajectory;
  double wall_clock_s = 0.0;
};

inline RunResult run_experiment(const ScenarioConfig& cfg,
                                const DataBundle& data) {
  require_valid(cfg);
  RunResult out;
  out.cfg = cfg;
  out.worker_counts = data.counts;
  out.total_samples = data.total_samples;
  out.optimum = data.optimum;

  Simulation sim(cfg, data);
  out.initial_loss = local_loss(sim.global(), data.task, data.pooled);
  out.metrics.reserve(static_cast<std::size_t>(cfg.num_iterations));
  for (int t = 0; t < cfg.num_iterations; ++t) out.metrics.push_back(sim.step());
  out.bound_inputs = sim.bound_inputs();
  out.final_model = sim.global();
  out.trajectory = sim.trajectory();
  out.final_train_loss = out.metrics.back().loss;
  if (cfg.task == TaskKind::linear_regression) {
    out.final_test_mse = local_loss(out.final_model, data.task, data.test);
  } else {
    out.final_test_accuracy =
        classification_accuracy(out.final_model, data.task, data.test);
  }

  std::vector<double> a_series;
  std::vector<BoundCoeffB> b_series;
  a_series.reserve(out.metrics.size());
  b_series.reserve(out.metrics.size());
  for (const auto& rec : out.metrics) {
    a_series.push_back(rec.a_t);
    b_series.push_back({rec.b_t, rec.b_unbounded});
  }
  // Without a known optimum, F(w0) still upper-bounds the initial gap since
  // both loss families are nonnegative.
  const double initial_gap =
      data.optimum ? out.initial_loss - data.optimum->loss : out.initial_loss;
  out.bound_trace =
      build_bound_trace(a_series, b_series, std::max(0.0, initial_gap),
                        cfg.strong_convexity, cfg.nonconvex_g());
  out.wall_clock_s = out.metrics.back().wall_clock_s;
  return out;
}

inline RunResult run_experiment(const ScenarioConfig& cfg,
                                const MnistPaths& mnist = {}) {
  const DataBundle data = prepare_data(cfg, mnist);
  return run_experiment(cfg, data);
}

inline constexpr const char* kMetricsCsvHeader =
    "t,loss,accuracy,selected_mean,b_mean,A_t,B_t";

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<MetricRecord>& metrics) {
  auto out = open_out(path);
  out << kMetricsCsvHeader << "\n";
  for (const auto& r : metrics) {
    out << r.t << "," << fmt_double(r.loss) << ","
        << (r.accuracy ? fmt_double(*r.accuracy) : std::string{}) << ","
        << fmt_double(r.selected_mean) << "," << fmt_double(r.b_mean) << ","
        << fmt_double(r.a_t) << "," << fmt_double(r.b_t) << "\n";
  }
}

inline void write_bound_inputs_csv(const std::filesystem::path& path,
                                   const std::vector<BoundInputsRecord>& rows) {
  auto out = open_out(path);
  out << "t,inv_sq_mass";
  if (!rows.empty())
    for (std::size_t i = 0; i < rows[0].deselect_counts.size(); ++i)
      out << ",deselect_" << (i + 1);
  out << "\n";
  for (const auto& r : rows) {
    out << r.t << "," << fmt_double(r.inv_sq_mass);
    for (auto c : r.deselect_counts) out << "," << c;
    out << "\n";
  }
}

inline void write_bound_trace_csv(
    const std::filesystem::path& path, const BoundTrace& tr,
    const std::vector<double>* empirical_gap = nullptr) {
  auto out = open_out(path);
  out << "t,A_t,B_t,Delta_t,cumulative_bound,empirical_gap,convex_flag,"
         "nonconvex_flag\n";
  for (std::size_t t = 0; t < tr.size(); ++t) {
    out << (t + 1) << "," << fmt_double(tr.a[t]) << ",";
    if (tr.b_unbounded[t]) out << "inf";
    else out << fmt_double(tr.b[t]);
    out << "," << fmt_double(tr.delta[t]) << ","
        << fmt_double(tr.cumulative[t]) << ",";
    if (empirical_gap && t < empirical_gap->size())
      out << fmt_double((*empirical_gap)[t]);
    out << "," << int(tr.convex_flag[t]) << "," << int(tr.nonconvex_flag[t])
        << "\n";
  }
}

inline nlohmann::json summary_json(const RunResult& r) {
  nlohmann::json j;
  j["config"] = config_to_json(r.cfg);
  j["worker_counts"] = r.worker_counts;
  j["total_samples"] = r.total_samples;
  j["initial_loss"] = r.initial_loss;
  j["final_train_loss"] = r.final_train_loss;
  if (r.final_test_mse) j["final_test_mse"] = *r.final_test_mse;
  if (r.final_test_accuracy) j["final_test_accuracy"] = *r.final_test_accuracy;
  if (r.optimum) {
    j["optimum"] = {{"slope", r.optimum->params[0]},
                    {"intercept", r.optimum->params[1]},
                    {"loss", r.optimum->loss}};
  }
  const auto convex = check_convex_convergence(r.cfg);
  j["convex_certificate"] = {{"ok", convex.ok}, {"margin", convex.margin}};
  j["wall_clock_s"] = r.wall_clock_s;
  return j;
}

// Per-run artifacts: metric curves, bound-coefficient inputs, the evaluated
// bound trace, a JSON summary, and optionally a loss-curve SVG.
inline void emit_reports(const RunResult& r, const std::filesystem::path& dir,
                         bool with_svg = false) {
  std::filesystem::create_directories(dir);
  write_metrics_csv(dir / "metrics.csv", r.metrics);
  write_bound_inputs_csv(dir / "bound_inputs.csv", r.bound_inputs);
  std::optional<std::vector<double>> gaps;
  if (r.optimum) {
    gaps.emplace();
    for (const auto& m : r.metrics)
      gaps->push_back(m.loss - r.optimum->loss);
  }
  write_bound_trace_csv(dir / "bound_trace.csv", r.bound_trace,
                        gaps ? &*gaps : nullptr);
  {
    auto out = open_out(dir / "summary.json");
    out << summary_json(r).dump(2) << "\n";
  }
  if (with_svg) {
    PlotSeries s;
    s.name = to_string(r.cfg.policy);
    for (const auto& m : r.metrics) {
      s.x.push_back(m.t);
      s.y.push_back(m.loss);
    }
    svg_line_plot(dir / "plot.svg", "training loss", "iteration", "loss",
                  {s});
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace detail

// Rebuilds the bound trace of a stored run from its emitted artifacts and
// writes bound_trace_recomputed.csv next to them.
inline BoundTrace recompute_bound_trace(const std::filesystem::path& run_dir) {
  std::ifstream sum_in(run_dir / "summary.json");
  if (!sum_in)
    throw IoError("cannot open " + (run_dir / "summary.json").string());
  nlohmann::json summary;
  sum_in >> summary;
  const ScenarioConfig cfg = config_from_json(summary.at("config"));
  const std::vector<std::int64_t> counts =
      summary.at("worker_counts").get<std::vector<std::int64_t>>();
  const double total = summary.at("total_samples").get<double>();
  const double initial_loss = summary.at("initial_loss").get<double>();
  double optimum_loss = 0.0;
  const bool have_optimum = summary.contains("optimum");
  if (have_optimum) optimum_loss = summary["optimum"]["loss"].get<double>();

  std::ifstream in(run_dir / "bound_inputs.csv");
  if (!in)
    throw IoError("cannot open " + (run_dir / "bound_inputs.csv").string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> a_series;
  std::vector<BoundCoeffB> b_series;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != counts.size() + 2)
      throw IoError("bound_inputs.csv row width mismatch");
    const double inv_sq = std::stod(cells[1]);
    std::vector<std::int64_t> deselect(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
      deselect[i] = std::stoll(cells[i + 2]);
    a_series.push_back(coeff_A_from_counts(deselect, counts, total,
                                           cfg.lipschitz, cfg.strong_convexity,
                                           cfg.rho2()));
    b_series.push_back(coeff_B_from_stats(inv_sq, deselect, counts, total,
                                          cfg.lipschitz, cfg.noise_variance_mw,
                                          cfg.grad_bound_rho1));
  }
  const double initial_gap =
      have_optimum ? std::max(0.0, initial_loss - optimum_loss) : initial_loss;
  BoundTrace tr = build_bound_trace(a_series, b_series, initial_gap,
                                    cfg.strong_convexity, cfg.nonconvex_g());

  std::optional<std::vector<double>> gaps;
  std::ifstream metrics_in(run_dir / "metrics.csv");
  if (metrics_in && have_optimum) {
    gaps.emplace();
    std::getline(metrics_in, line);
    while (std::getline(metrics_in, line)) {
      if (line.empty()) continue;
      const auto cells = detail::split_csv_line(line);
      gaps->push_back(std::stod(cells[1]) - optimum_loss);
    }
  }
  write_bound_trace_csv(run_dir / "bound_trace_recomputed.csv", tr,
                        gaps ? &*gaps : nullptr);
  return tr;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis { workers, noise, samples };

inline std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::workers: return "workers";
    case SweepAxis::noise: return "noise";
    default: return "samples";
  }
}

struct SweepPoint {
  double axis_value = 0.0;
  Policy policy = Policy::inflota;
  int seeds = 0;
  double mean_final_loss = 0.0;
  double mean_final_test_metric = 0.0;
};

inline ScenarioConfig apply_axis(ScenarioConfig cfg, SweepAxis axis,
                                 double value) {
  switch (axis) {
    case SweepAxis::workers:
      cfg.num_workers = static_cast<int>(value);
      break;
    case SweepAxis::noise:
      cfg.noise_variance_mw = value;
      break;
    case SweepAxis::samples: {
      // samples-per-worker average; draws fluctuate +-20% around it
      const auto avg = static_cast<std::int64_t>(value);
      cfg.samples_min = std::max<std::int64_t>(1, avg - avg / 5);
      cfg.samples_max = avg + avg / 5;
      break;
    }
  }
  return cfg;
}

inline std::vector<SweepPoint> run_sweep(const ScenarioConfig& base,
                                         SweepAxis axis,
                                         const std::vector<double>& values,
                                         const std::vector<Policy>& policies,
                                         int seeds,
                                         const MnistPaths& mnist = {}) {
  std::vector<SweepPoint> out;
  for (double v : values) {
    for (Policy p : policies) {
      SweepPoint pt;
      pt.axis_value = v;
      pt.policy = p;
      pt.seeds = seeds;
      for (int s = 0; s < seeds; ++s) {
        ScenarioConfig cfg = apply_axis(base, axis, v);
        cfg.policy = p;
        cfg.rng_seed = base.rng_seed + static_cast<std::uint64_t>(s);
        const RunResult r = run_experiment(cfg, mnist);
        pt.mean_final_loss += r.final_train_loss;
        pt.mean_final_test_metric = pt.mean_final_test_metric +
                                    (r.final_test_mse ? *r.final_test_mse
                                                      : *r.final_test_accuracy);
      }
      pt.mean_final_loss /= seeds;
      pt.mean_final_test_metric /= seeds;
      out.push_back(pt);
    }
  }
  return out;
}

inline void write_sweep_csv(const std::filesystem::path& path, SweepAxis axis,
                            const std::vector<SweepPoint>& points) {
  auto out = open_out(path);
  out << "axis,value,policy,seeds,mean_final_loss,mean_final_test_metric\n";
  for (const auto& p : points) {
    out << to_string(axis) << "," << fmt_double(p.axis_value) << ","
        << to_string(p.policy) << "," << p.seeds << ","
        << fmt_double(p.mean_final_loss) << ","
        << fmt_double(p.mean_final_test_metric) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Scheduler validation harness (line search vs exhaustive reference)

struct OracleInstance {
  double prev_global_entry = 0.0;
  double eta = 0.0;
  std::vector<double> gains;
  std::vector<std::int64_t> sample_counts;
  std::vector<double> max_powers_mw;
  double lipschitz = 1.0;
  double noise_variance = 0.0;
  double rho1 = 1.0;
  double total_samples = 0.0;

  SchedulerInput input() const {
    SchedulerInput in;
    in.prev_global_entry = prev_global_entry;
    in.eta = eta;
    in.gains = gains;
    in.sample_counts = sample_counts;
    in.max_powers_mw = max_powers_mw;
    in.lipschitz = lipschitz;
    in.noise_variance = noise_variance;
    in.rho1 = rho1;
    in.total_samples = total_samples;
    return in;
  }
};

// Log-uniform powers and gains, integer sample counts in [1, 100], random
// positive constants.
inline OracleInstance random_oracle_instance(int num_workers, Rng& rng) {
  OracleInstance inst;
  inst.prev_global_entry = rng.normal();
  inst.eta = rng.uniform(0.0, 0.5);
  for (int i = 0; i < num_workers; ++i) {
    inst.max_powers_mw.push_back(std::pow(10.0, rng.uniform(-2.0, 2.0)));
    inst.gains.push_back(std::pow(10.0, rng.uniform(-2.0, 1.0)));
    inst.sample_counts.push_back(rng.uniform_int(1, 100));
    inst.total_samples += static_cast<double>(inst.sample_counts.back());
  }
  inst.lipschitz = std::pow(10.0, rng.uniform(-1.0, 1.0));
  inst.noise_variance = std::pow(10.0, rng.uniform(-6.0, 0.0));
  inst.rho1 = std::pow(10.0, rng.uniform(-3.0, 1.0));
  return inst;
}

struct OracleCheckResult {
  int total = 0;
  int mismatches = 0;
  double max_abs_diff = 0.0;
};

inline OracleCheckResult oracle_check(int instances, int min_workers,
                                      int max_workers, std::uint64_t seed) {
  Rng rng(seed);
  OracleCheckResult res;
  for (int n = 0; n < instances; ++n) {
    const int u =
        static_cast<int>(rng.uniform_int(min_workers, max_workers));
    const OracleInstance inst = random_oracle_instance(u, rng);
    const SchedulerInput in = inst.input();
    const FeasiblePoint fast = solve_p4(in);
    const FeasiblePoint exact = brute_force_oracle(in);
    ++res.total;
    if (fast.objective != exact.objective) {
      ++res.mismatches;
      res.max_abs_diff = std::max(
          res.max_abs_diff, std::abs(fast.objective - exact.objective));
    }
  }
  return res;
}

}  // namespace otafl
