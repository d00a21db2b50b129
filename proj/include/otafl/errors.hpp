#pragma once

#include <stdexcept>
#include <string>

namespace otafl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid scenario configuration or misuse of a configured facility.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Vector/matrix dimensions inconsistent with the task or scenario.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Nonphysical channel state (nonpositive gain, bad realization shape).
class ChannelError : public Error {
 public:
  using Error::Error;
};

// Aggregation cannot be formed (empty worker set, all-deselected entry).
class AggregationError : public Error {
 public:
  using Error::Error;
};

// Entry with |w_{t-1}| + eta == 0: every scaling factor is feasible and the
// per-worker maximum is unbounded. Callers handle it via the configured
// scaling ceiling.
class DegenerateEntryError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// IDX container parse failure with a machine-checkable category.
class IdxError : public Error {
 public:
  enum class Kind { bad_magic, truncated, dim_overflow };

  IdxError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace otafl
