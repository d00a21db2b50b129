#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <vector>

#include "otafl/errors.hpp"
#include "otafl/learning.hpp"
#include "otafl/rng.hpp"

namespace otafl {

// y = slope * x + intercept + noise_scale * n, x uniform on [x_lo, x_hi].
struct SyntheticRegressionSpec {
  double slope = -2.0;
  double intercept = 1.0;
  double noise_scale = 0.4;
  double x_lo = 0.0;
  double x_hi = 1.0;
  std::int64_t samples_min = 50;  // per-worker sample-count range
  std::int64_t samples_max = 100;
};

inline Dataset gen_synthetic_pool(const SyntheticRegressionSpec& spec,
                                  std::int64_t n, Rng& stream) {
  if (spec.noise_scale < 0.0 || spec.samples_min <= 0 ||
      spec.samples_max < spec.samples_min)
    throw ConfigError("invalid synthetic regression spec");
  Dataset d;
  d.n = static_cast<std::size_t>(n);
  d.in_dim = 1;
  d.out_dim = 1;
  d.inputs.resize(d.n);
  d.targets.resize(d.n);
  for (std::size_t k = 0; k < d.n; ++k) {
    const double x = stream.uniform(spec.x_lo, spec.x_hi);
    d.inputs[k] = x;
    d.targets[k] =
        spec.slope * x + spec.intercept + spec.noise_scale * stream.normal();
  }
  return d;
}

// Per-worker synthetic datasets; K_i drawn uniformly from the spec's range.
inline std::vector<Dataset> gen_synthetic(const SyntheticRegressionSpec& spec,
                                          int num_workers, Rng& stream) {
  std::vector<Dataset> out;
  out.reserve(static_cast<std::size_t>(num_workers));
  for (int i = 0; i < num_workers; ++i) {
    const std::int64_t k = stream.uniform_int(spec.samples_min, spec.samples_max);
    out.push_back(gen_synthetic_pool(spec, k, stream));
  }
  return out;
}

// The MNIST container: big-endian magic, big-endian dimension sizes, raw
// unsigned byte payload. Magic 0x803 carries 3 dims (images), 0x801 one
// (labels).
struct IdxFile {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t count() const { return dims.empty() ? 0 : dims[0]; }
};

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

inline void write_be32(std::uint32_t v, std::vector<std::uint8_t>& out) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace detail

inline IdxFile parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4)
    throw IdxError(IdxError::Kind::truncated, "idx header truncated");
  IdxFile f;
  f.magic = detail::read_be32(bytes.data());
  std::size_t ndims = 0;
  if (f.magic == kIdxImagesMagic) ndims = 3;
  else if (f.magic == kIdxLabelsMagic) ndims = 1;
  else throw IdxError(IdxError::Kind::bad_magic, "unrecognized idx magic");
  if (bytes.size() < 4 + 4 * ndims)
    throw IdxError(IdxError::Kind::truncated, "idx dimension header truncated");
  f.dims.resize(ndims);
  std::uint64_t total = 1;
  constexpr std::uint64_t kMaxPayload = std::uint64_t{1} << 32;
  for (std::size_t i = 0; i < ndims; ++i) {
    f.dims[i] = detail::read_be32(bytes.data() + 4 + 4 * i);
    total *= f.dims[i];
    if (total > kMaxPayload)
      throw IdxError(IdxError::Kind::dim_overflow,
                     "idx dimension product overflows sane payload size");
  }
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() - header != total)
    throw IdxError(IdxError::Kind::truncated,
                   "idx payload length does not match dimensions");
  f.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                   bytes.end());
  return f;
}

inline IdxFile load_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open idx file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

inline std::vector<std::uint8_t> serialize_idx(const IdxFile& f) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * f.dims.size() + f.payload.size());
  detail::write_be32(f.magic, out);
  for (auto d : f.dims) detail::write_be32(d, out);
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

inline void write_idx(const std::filesystem::path& path, const IdxFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write idx file: " + path.string());
  const auto bytes = serialize_idx(f);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to idx file: " + path.string());
}

struct Partition {
  std::vector<std::vector<std::int64_t>> assignment;  // per-worker indices
  std::vector<std::int64_t> counts;                   // K_i
};

struct MnistSplit {
  Partition partition;
  std::vector<Dataset> worker_data;
};

// Converts one image/label pair into a sample row: pixels scaled to [0,1],
// label one-hot over 10 classes.
inline Dataset make_image_dataset(const IdxFile& images, const IdxFile& labels,
                                  std::span<const std::int64_t> indices) {
  if (images.magic != kIdxImagesMagic || labels.magic != kIdxLabelsMagic)
    throw IdxError(IdxError::Kind::bad_magic, "expected image and label files");
  if (images.count() != labels.count())
    throw ShapeError("image/label counts differ");
  const std::size_t pixels = images.dims[1] * std::size_t{images.dims[2]};
  Dataset d;
  d.n = indices.size();
  d.in_dim = pixels;
  d.out_dim = 10;
  d.inputs.resize(d.n * pixels);
  d.targets.assign(d.n * 10, 0.0);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto idx = static_cast<std::size_t>(indices[k]);
    const std::uint8_t* src = images.payload.data() + idx * pixels;
    for (std::size_t p = 0; p < pixels; ++p)
      d.inputs[k * pixels + p] = src[p] / 255.0;
    const std::uint8_t label = labels.payload[idx];
    if (label > 9) throw ShapeError("label out of range");
    d.targets[k * 10 + label] = 1.0;
  }
  return d;
}

// Draws a total sample count from [total_min, total_max] (or per-worker
// counts when per_worker is set), samples that many indices without
// replacement, and splits them as evenly as possible: the first
// (N mod U) workers receive one extra sample.
inline MnistSplit partition_mnist(const IdxFile& images, const IdxFile& labels,
                                  int num_workers, std::int64_t total_min,
                                  std::int64_t total_max, bool per_worker,
                                  Rng& stream) {
  if (images.count() != labels.count())
    throw ShapeError("image/label counts differ");
  const auto available = static_cast<std::int64_t>(images.count());
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_workers));
  std::int64_t total = 0;
  if (per_worker) {
    for (auto& c : counts) {
      c = stream.uniform_int(total_min, total_max);
      total += c;
    }
  } else {
    total = stream.uniform_int(total_min, total_max);
    const std::int64_t base = total / num_workers;
    const std::int64_t rem = total % num_workers;
    for (int i = 0; i < num_workers; ++i)
      counts[static_cast<std::size_t>(i)] = base + (i < rem ? 1 : 0);
  }
  if (total > available)
    throw ConfigError("requested more samples than the dataset provides");

  // Partial Fisher-Yates: the first `total` slots end up a uniform
  // without-replacement draw.
  std::vector<std::int64_t> pool(static_cast<std::size_t>(available));
  std::iota(pool.begin(), pool.end(), std::int64_t{0});
  for (std::int64_t k = 0; k < total; ++k) {
    const std::int64_t j = stream.uniform_int(k, available - 1);
    std::swap(pool[static_cast<std::size_t>(k)],
              pool[static_cast<std::size_t>(j)]);
  }

  MnistSplit split;
  split.partition.counts = counts;
  split.partition.assignment.resize(static_cast<std::size_t>(num_workers));
  split.worker_data.reserve(static_cast<std::size_t>(num_workers));
  std::int64_t cursor = 0;
  for (int i = 0; i < num_workers; ++i) {
    auto& slot = split.partition.assignment[static_cast<std::size_t>(i)];
    slot.assign(pool.begin() + cursor,
                pool.begin() + cursor + counts[static_cast<std::size_t>(i)]);
    cursor += counts[static_cast<std::size_t>(i)];
    split.worker_data.push_back(make_image_dataset(images, labels, slot));
  }
  return split;
}

}  // namespace otafl
