#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "otafl/config.hpp"
#include "otafl/errors.hpp"

namespace otafl {

// Everything the PS knows when scheduling one entry: the broadcast entry
// value, the scaling margin eta, per-worker channel gains, sample counts and
// power caps, and the constants of the per-entry offset objective.
struct SchedulerInput {
  double prev_global_entry = 0.0;  // w_{t-1}^d
  double eta = 0.0;
  std::span<const double> gains;            // h_i, length U
  std::span<const std::int64_t> sample_counts;  // K_i
  std::span<const double> max_powers_mw;        // P_i^Max
  double lipschitz = 1.0;
  double noise_variance = 0.0;
  double rho1 = 1.0;
  double total_samples = 0.0;  // K
  double b_ceiling = 1e6;      // used only for degenerate entries

  std::size_t num_workers() const { return gains.size(); }
};

struct FeasiblePoint {
  double b = 0.0;
  std::vector<std::uint8_t> beta;
  double objective = std::numeric_limits<double>::infinity();
};

// Per-entry offset component: noise amplification of the selected mass plus
// the exclusion penalty of the deselected workers,
//   R = L sigma^2 / (2 (sum_i beta_i K_i b)^2)
//     + sum_i K_i rho1 (1 - beta_i) / (2 L K).
inline double objective_R(double b, std::span<const std::uint8_t> beta,
                          const SchedulerInput& in) {
  if (b <= 0.0) throw ConfigError("scaling factor must be positive");
  double selected_mass = 0.0;
  double excluded = 0.0;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    const double k = static_cast<double>(in.sample_counts[i]);
    if (beta[i]) selected_mass += k;
    else excluded += k;
  }
  if (selected_mass <= 0.0)
    throw AggregationError("objective undefined for an all-zero selection");
  const double denom = selected_mass * b;
  return in.lipschitz * in.noise_variance / (2.0 * denom * denom) +
         excluded * in.rho1 / (2.0 * in.lipschitz * in.total_samples);
}

// Largest scaling factor worker k can serve under its power cap when the
// local entry magnitude is replaced by the observable |w_{t-1}| + eta:
//   b_k^Max = sqrt(P_k) h_k / (K_k (|w_{t-1}| + eta)).
inline double max_scaling(std::size_t k, const SchedulerInput& in) {
  const double margin = std::abs(in.prev_global_entry) + in.eta;
  if (margin <= 0.0)
    throw DegenerateEntryError("entry has |w| + eta == 0; any scaling fits");
  return std::sqrt(in.max_powers_mw[k]) * in.gains[k] /
         (static_cast<double>(in.sample_counts[k]) * margin);
}

// Selection induced by a scaling factor: worker i participates iff its cap
// admits b, boundary included so the candidate's defining worker stays in.
inline void induced_selection(double b, const SchedulerInput& in,
                              std::span<std::uint8_t> out) {
  for (std::size_t i = 0; i < in.num_workers(); ++i)
    out[i] = b <= max_scaling(i, in) ? 1 : 0;
}

inline std::vector<std::uint8_t> induced_selection(double b,
                                                   const SchedulerInput& in) {
  std::vector<std::uint8_t> beta(in.num_workers());
  induced_selection(b, in, beta);
  return beta;
}

namespace detail {

struct SchedulerScratch {
  std::vector<double> b_max;
  std::vector<std::uint8_t> beta;
};

inline void degenerate_point(const SchedulerInput& in, FeasiblePoint& out) {
  out.b = in.b_ceiling;
  out.beta.assign(in.num_workers(), 1);
  out.objective = objective_R(out.b, out.beta, in);
}

}  // namespace detail

// Line search over the U candidate points b^(k) = b_k^Max with their induced
// selections. Ties break toward larger b, then toward the smaller worker
// index. The candidate b = min_k b_k^Max selects everyone, so the search
// space is never empty.
inline void solve_p4(const SchedulerInput& in, FeasiblePoint& out,
                     detail::SchedulerScratch& scratch) {
  const std::size_t u = in.num_workers();
  if (u == 0) throw ConfigError("scheduler needs at least one worker");
  if (std::abs(in.prev_global_entry) + in.eta <= 0.0) {
    detail::degenerate_point(in, out);
    return;
  }
  scratch.b_max.resize(u);
  for (std::size_t k = 0; k < u; ++k) scratch.b_max[k] = max_scaling(k, in);
  scratch.beta.resize(u);
  out.objective = std::numeric_limits<double>::infinity();
  out.b = 0.0;
  for (std::size_t k = 0; k < u; ++k) {
    const double b = scratch.b_max[k];
    for (std::size_t i = 0; i < u; ++i)
      scratch.beta[i] = b <= scratch.b_max[i] ? 1 : 0;
    const double r = objective_R(b, scratch.beta, in);
    if (r < out.objective || (r == out.objective && b > out.b)) {
      out.objective = r;
      out.b = b;
      out.beta.assign(scratch.beta.begin(), scratch.beta.end());
    }
  }
}

inline FeasiblePoint solve_p4(const SchedulerInput& in) {
  FeasiblePoint out;
  detail::SchedulerScratch scratch;
  solve_p4(in, out, scratch);
  return out;
}

// Exhaustive reference: enumerate every nonempty worker subset, give it the
// largest scaling all its members admit, and take the best objective. Only
// for validation; cost 2^U.
inline FeasiblePoint brute_force_oracle(const SchedulerInput& in) {
  const std::size_t u = in.num_workers();
  if (u == 0) throw ConfigError("scheduler needs at least one worker");
  if (u > 20) throw ConfigError("brute force limited to 20 workers");
  if (std::abs(in.prev_global_entry) + in.eta <= 0.0) {
    FeasiblePoint out;
    detail::degenerate_point(in, out);
    return out;
  }
  std::vector<double> b_max(u);
  for (std::size_t k = 0; k < u; ++k) b_max[k] = max_scaling(k, in);
  FeasiblePoint best;
  std::vector<std::uint8_t> beta(u);
  best.b = 0.0;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << u); ++mask) {
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u; ++i) {
      beta[i] = (mask >> i) & 1;
      if (beta[i]) b = std::min(b, b_max[i]);
    }
    const double r = objective_R(b, beta, in);
    if (r < best.objective || (r == best.objective && b > best.b)) {
      best.objective = r;
      best.b = b;
      best.beta.assign(beta.begin(), beta.end());
    }
  }
  return best;
}

// Scaling-margin eta for one entry. Fixed mode returns the configured
// constant; adaptive mode returns |w_{t-1} - w_{t-2}|, falling back to the
// constant before two global models exist.
inline double compute_eta(const EtaConfig& cfg, double w_prev, double w_prev2,
                          bool have_history) {
  if (cfg.mode == EtaMode::fixed || !have_history) return cfg.value;
  return std::abs(w_prev - w_prev2);
}

}  // namespace otafl
