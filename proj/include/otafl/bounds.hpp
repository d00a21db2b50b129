#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "otafl/channel.hpp"
#include "otafl/config.hpp"
#include "otafl/errors.hpp"
#include "otafl/learning.hpp"

namespace otafl {

// Inputs of the per-iteration gap recursion coefficients.
struct IterationBoundInputs {
  const SchedulingDecision* decision = nullptr;
  std::span<const std::int64_t> sample_counts;  // K_i
  double total_samples = 0.0;                   // K
  double lipschitz = 1.0;
  double strong_convexity = 0.1;
  double noise_variance = 0.0;
  double rho1 = 1.0;
  double rho2 = 0.0;
};

// ||1 - beta_i||^2 for one worker: the count of its deselected entries.
inline std::int64_t deselected_entries(const SchedulingDecision& d,
                                       std::size_t worker) {
  std::int64_t count = 0;
  for (std::size_t k = 0; k < d.dim; ++k)
    if (!d.selected(worker, k)) ++count;
  return count;
}

// sum_d (b_d * sum_i K_i beta_{i,d})^-2, the noise-amplification mass of a
// decision. Returns nullopt if some entry has an empty selection.
inline std::optional<double> inverse_square_mass(
    const SchedulingDecision& d, std::span<const std::int64_t> sample_counts) {
  double acc = 0.0;
  for (std::size_t k = 0; k < d.dim; ++k) {
    double mass = 0.0;
    for (std::size_t i = 0; i < d.num_workers; ++i)
      if (d.selected(i, k)) mass += static_cast<double>(sample_counts[i]);
    mass *= d.scaling[k];
    if (mass <= 0.0) return std::nullopt;
    acc += 1.0 / (mass * mass);
  }
  return acc;
}

// Contraction coefficient from per-worker deselection counts:
//   A = (L - mu)/L + sum_i mu K_i rho2 cnt_i / (L K).
inline double coeff_A_from_counts(std::span<const std::int64_t> deselect_counts,
                                  std::span<const std::int64_t> sample_counts,
                                  double total_samples, double lipschitz,
                                  double strong_convexity, double rho2) {
  double penalty = 0.0;
  for (std::size_t i = 0; i < deselect_counts.size(); ++i)
    penalty += static_cast<double>(sample_counts[i]) *
               static_cast<double>(deselect_counts[i]);
  return (lipschitz - strong_convexity) / lipschitz +
         strong_convexity * rho2 * penalty / (lipschitz * total_samples);
}

inline double coeff_A(const IterationBoundInputs& in) {
  const auto& d = *in.decision;
  std::vector<std::int64_t> counts(d.num_workers);
  for (std::size_t i = 0; i < d.num_workers; ++i)
    counts[i] = deselected_entries(d, i);
  return coeff_A_from_counts(counts, in.sample_counts, in.total_samples,
                             in.lipschitz, in.strong_convexity, in.rho2);
}

// Additive offset coefficient. `unbounded` flags an all-deselected entry,
// where the bound is infinite; it is never encoded as a floating overflow.
struct BoundCoeffB {
  double value = 0.0;
  bool unbounded = false;
};

inline BoundCoeffB coeff_B_from_stats(
    double inverse_square_mass_sum,
    std::span<const std::int64_t> deselect_counts,
    std::span<const std::int64_t> sample_counts, double total_samples,
    double lipschitz, double noise_variance, double rho1) {
  double excluded = 0.0;
  for (std::size_t i = 0; i < deselect_counts.size(); ++i)
    excluded += static_cast<double>(sample_counts[i]) *
                static_cast<double>(deselect_counts[i]);
  return {lipschitz * noise_variance / 2.0 * inverse_square_mass_sum +
              excluded * rho1 / (2.0 * lipschitz * total_samples),
          false};
}

inline BoundCoeffB coeff_B(const IterationBoundInputs& in) {
  const auto& d = *in.decision;
  const auto mass = inverse_square_mass(d, in.sample_counts);
  if (!mass) return {0.0, true};
  std::vector<std::int64_t> counts(d.num_workers);
  for (std::size_t i = 0; i < d.num_workers; ++i)
    counts[i] = deselected_entries(d, i);
  return coeff_B_from_stats(*mass, counts, in.sample_counts, in.total_samples,
                            in.lipschitz, in.noise_variance, in.rho1);
}

// Cumulative gap after each iteration, G_t = Delta_t + (prod_j A_j) * G_0,
// with the impairment accumulator Delta_t = A_t Delta_{t-1} + B_t, Delta_0=0.
inline std::vector<double> cumulative_gap(std::span<const double> a,
                                          std::span<const double> b,
                                          double initial_gap) {
  if (a.size() != b.size()) throw ShapeError("A/B series length mismatch");
  if (initial_gap < 0.0) throw ConfigError("initial gap must be nonnegative");
  std::vector<double> g(a.size());
  double delta = 0.0;
  double decay = 1.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    delta = a[t] * delta + b[t];
    decay *= a[t];
    g[t] = delta + decay * initial_gap;
  }
  return g;
}

// Convergence certificate of the convex case: 0 < rho2 <= 1/D.
struct ConvergenceCheck {
  bool ok = false;
  double margin = 0.0;  // 1/D - rho2
};

inline ConvergenceCheck check_convex_convergence(const ScenarioConfig& cfg) {
  const double r2 = cfg.rho2();
  const double inv_d = 1.0 / cfg.dim();
  return {r2 > 0.0 && r2 <= inv_d, inv_d - r2};
}

inline ConvergenceCheck check_convex_convergence(double rho2, int dim) {
  const double inv_d = 1.0 / dim;
  return {rho2 > 0.0 && rho2 <= inv_d, inv_d - rho2};
}

// Nonconvex per-iteration condition: |1 + (A_t - 1) G / (2 mu)| <= 1.
inline bool check_nonconvex_condition(double a_t, double mu, double g) {
  if (g <= 0.0) throw ConfigError("nonconvex G must be positive");
  return std::abs(1.0 + (a_t - 1.0) * g / (2.0 * mu)) <= 1.0;
}

// One step of the nonconvex gap recursion:
// B_t + (A_t - 1) G_t / (2 mu) + previous gap.
inline double nonconvex_gap_step(double prev_gap, double a_t, double b_t,
                                 double g_t_bound, double mu) {
  if (mu <= 0.0) throw ConfigError("mu must be positive");
  return b_t + (a_t - 1.0) * g_t_bound / (2.0 * mu) + prev_gap;
}

// Per-iteration coefficients, accumulator, bound, and condition flags.
struct BoundTrace {
  std::vector<double> a;            // A_t
  std::vector<double> b;            // B_t (finite part)
  std::vector<std::uint8_t> b_unbounded;
  std::vector<double> delta;        // Delta_t
  std::vector<double> cumulative;   // G_t
  std::vector<std::uint8_t> convex_flag;     // A_t <= 1
  std::vector<std::uint8_t> nonconvex_flag;  // recursion condition
  double initial_gap = 0.0;

  std::size_t size() const { return a.size(); }
};

inline BoundTrace build_bound_trace(std::span<const double> a,
                                    std::span<const BoundCoeffB> b,
                                    double initial_gap, double mu,
                                    double nonconvex_g) {
  BoundTrace tr;
  tr.initial_gap = initial_gap;
  tr.a.assign(a.begin(), a.end());
  tr.b.reserve(b.size());
  tr.b_unbounded.reserve(b.size());
  for (const auto& coeff : b) {
    tr.b.push_back(coeff.value);
    tr.b_unbounded.push_back(coeff.unbounded ? 1 : 0);
  }
  tr.delta.resize(a.size());
  tr.cumulative.resize(a.size());
  tr.convex_flag.resize(a.size());
  tr.nonconvex_flag.resize(a.size());
  double delta = 0.0;
  double decay = 1.0;
  bool hit_unbounded = false;
  for (std::size_t t = 0; t < a.size(); ++t) {
    hit_unbounded = hit_unbounded || tr.b_unbounded[t];
    delta = a[t] * delta + tr.b[t];
    decay *= a[t];
    tr.delta[t] = delta;
    tr.cumulative[t] = delta + decay * initial_gap;
    // once an entry went all-deselected the bound stays meaningless
    tr.b_unbounded[t] = hit_unbounded ? 1 : 0;
    tr.convex_flag[t] = a[t] <= 1.0 ? 1 : 0;
    tr.nonconvex_flag[t] =
        check_nonconvex_condition(a[t], mu, nonconvex_g) ? 1 : 0;
  }
  return tr;
}

// Bounded-local-gradient constants measured from a model trajectory: the
// slope rho2 is a least-squares fit of max-per-sample gradient energy
// against global gradient energy (clamped to be nonnegative), and rho1
// covers the largest residual so the bound holds at every visited model.
struct GradBoundEstimate {
  double rho1 = 0.0;
  double rho2 = 0.0;
};

inline GradBoundEstimate measure_grad_bounds(
    std::span<const ModelParams> trajectory, const TaskModel& task,
    const Dataset& pooled, double inflation = 1.0,
    double rho2_max = std::numeric_limits<double>::infinity()) {
  if (trajectory.empty()) throw ConfigError("empty trajectory");
  std::vector<double> global_norm2(trajectory.size());
  std::vector<double> worst_sample(trajectory.size());
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const auto g = local_gradient(trajectory[t], task, pooled);
    global_norm2[t] = squared_norm(g);
    worst_sample[t] = max_sample_gradient_norm2(trajectory[t], task, pooled);
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    sxx += global_norm2[t] * global_norm2[t];
    sxy += global_norm2[t] * worst_sample[t];
  }
  GradBoundEstimate est;
  est.rho2 = sxx > 0.0 ? std::max(0.0, sxy / sxx) : 0.0;
  // rho2_max lets callers stay inside the convergence-certified slope range;
  // rho1 absorbs whatever the clamped slope leaves uncovered.
  est.rho2 = std::min(est.rho2, rho2_max);
  for (std::size_t t = 0; t < trajectory.size(); ++t)
    est.rho1 = std::max(est.rho1,
                        worst_sample[t] - est.rho2 * global_norm2[t]);
  est.rho1 = std::max(est.rho1, 0.0) * inflation;
  est.rho2 *= inflation;
  return est;
}

}  // namespace otafl
