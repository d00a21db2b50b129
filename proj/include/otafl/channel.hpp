#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "otafl/errors.hpp"
#include "otafl/learning.hpp"
#include "otafl/rng.hpp"

namespace otafl {

// Per-iteration fading state: positive amplitude gains h_{i,t}^d (U x D,
// row-major by worker) and the receiver noise variance.
struct ChannelRealization {
  std::size_t num_workers = 0;
  std::size_t dim = 0;
  std::vector<double> gains;
  double noise_variance = 0.0;

  double gain(std::size_t i, std::size_t d) const { return gains[i * dim + d]; }
  double& gain(std::size_t i, std::size_t d) { return gains[i * dim + d]; }
};

// Per-entry scaling b_t^d plus the U x D binary selection matrix.
struct SchedulingDecision {
  std::size_t num_workers = 0;
  std::size_t dim = 0;
  std::vector<double> scaling;          // length D, all positive
  std::vector<std::uint8_t> selection;  // U x D, row-major by worker

  std::uint8_t selected(std::size_t i, std::size_t d) const {
    return selection[i * dim + d];
  }
  std::uint8_t& selected(std::size_t i, std::size_t d) {
    return selection[i * dim + d];
  }
};

struct ReceivedSignal {
  std::vector<double> values;  // length D
};

// Rayleigh amplitudes: squared gain is unit-mean exponential, the stored
// gain is its positive square root. `constant_across_entries` reuses one
// draw per worker for all entries of the iteration.
inline ChannelRealization draw_channel(std::size_t num_workers, std::size_t dim,
                                       double noise_variance, Rng& stream,
                                       bool constant_across_entries = false) {
  ChannelRealization ch;
  ch.num_workers = num_workers;
  ch.dim = dim;
  ch.noise_variance = noise_variance;
  ch.gains.resize(num_workers * dim);
  for (std::size_t i = 0; i < num_workers; ++i) {
    if (constant_across_entries) {
      const double h = std::sqrt(stream.exponential());
      for (std::size_t d = 0; d < dim; ++d) ch.gain(i, d) = h;
    } else {
      for (std::size_t d = 0; d < dim; ++d)
        ch.gain(i, d) = std::sqrt(stream.exponential());
    }
  }
  return ch;
}

// Channel-inverting transmit amplitude with the power-cap clamp:
// sgn(w) * min(K_i * b * |w| / h, sqrt(P_max)); silent when deselected.
// The square of the result never exceeds P_max.
inline double transmit_amplitude(double w_entry, double sample_count, double b,
                                 double h, std::uint8_t selected,
                                 double p_max_mw) {
  if (!selected) return 0.0;
  if (h <= 0.0) throw ChannelError("channel gain must be positive");
  const double mag = sample_count * b * std::abs(w_entry) / h;
  const double amp = std::min(mag, std::sqrt(p_max_mw));
  return w_entry < 0.0 ? -amp : (w_entry > 0.0 ? amp : 0.0);
}

// Multiple-access superposition: y_d = sum_i h_{i,d} * a_{i,d} + z_d with
// z_d zero-mean Gaussian of variance sigma^2, drawn in entry order.
inline ReceivedSignal superpose(std::span<const double> amplitudes,
                                const ChannelRealization& ch, Rng& noise) {
  if (amplitudes.size() != ch.num_workers * ch.dim)
    throw ShapeError("amplitude matrix does not match channel realization");
  ReceivedSignal y;
  y.values.assign(ch.dim, 0.0);
  for (std::size_t i = 0; i < ch.num_workers; ++i) {
    const double* a = amplitudes.data() + i * ch.dim;
    for (std::size_t d = 0; d < ch.dim; ++d) y.values[d] += ch.gain(i, d) * a[d];
  }
  const double sigma = std::sqrt(ch.noise_variance);
  for (std::size_t d = 0; d < ch.dim; ++d) y.values[d] += sigma * noise.normal();
  return y;
}

// Post-processing estimate: w_d = y_d / (b_d * sum_i K_i beta_{i,d}).
// An all-deselected entry has no defined estimate and is rejected loudly.
inline ModelParams ps_estimate(const ReceivedSignal& y,
                               const SchedulingDecision& decision,
                               std::span<const std::int64_t> weights) {
  if (y.values.size() != decision.dim ||
      weights.size() != decision.num_workers)
    throw ShapeError("received signal does not match scheduling decision");
  ModelParams out(decision.dim);
  for (std::size_t d = 0; d < decision.dim; ++d) {
    double denom = 0.0;
    for (std::size_t i = 0; i < decision.num_workers; ++i) {
      if (decision.selected(i, d))
        denom += static_cast<double>(weights[i]);
    }
    denom *= decision.scaling[d];
    if (denom <= 0.0)
      throw AggregationError("all workers deselected for an entry");
    out[d] = y.values[d] / denom;
  }
  return out;
}

}  // namespace otafl
