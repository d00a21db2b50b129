#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <string_view>

#include "otafl/errors.hpp"

namespace otafl {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

// Deterministic random stream. The engine (mt19937_64) is fully specified by
// the standard; the value transforms below are spelled out rather than taken
// from std::*_distribution, whose algorithms are implementation-defined.
// Identical seeds therefore yield identical draw sequences on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform on [0, 1) with 53 significant bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer on [lo, hi], unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return lo + static_cast<std::int64_t>(eng_());  // full range
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t r = eng_();
    while (r >= limit) r = eng_();
    return lo + static_cast<std::int64_t>(r % span);
  }

  // Standard normal via Box-Muller; two uniforms per draw, no cached spare.
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unit-mean exponential.
  double exponential() { return -std::log(1.0 - uniform01()); }

 private:
  std::mt19937_64 eng_;
};

// Root seed plus named derived streams. Each (label, iteration) pair maps to
// an independent stream, so toggling one randomness source never shifts the
// draws of another.
class RngStreams {
 public:
  static constexpr std::array<std::string_view, 4> kLabels = {
      "channel", "noise", "data", "policy"};

  explicit RngStreams(std::uint64_t root_seed) : root_(root_seed) {}

  std::uint64_t root() const noexcept { return root_; }

  Rng stream(std::string_view label, std::uint64_t iteration) const {
    return Rng(derive_seed(label, iteration));
  }

  std::uint64_t derive_seed(std::string_view label,
                            std::uint64_t iteration) const {
    if (!known_label(label)) {
      throw ConfigError("unknown rng stream label: " + std::string(label));
    }
    const std::uint64_t a = detail::splitmix64(root_ ^ detail::fnv1a64(label));
    return detail::splitmix64(a ^ detail::splitmix64(iteration));
  }

  static bool known_label(std::string_view label) {
    for (auto l : kLabels) {
      if (l == label) return true;
    }
    return false;
  }

 private:
  std::uint64_t root_;
};

}  // namespace otafl
