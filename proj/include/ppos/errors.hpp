#pragma once

#include <stdexcept>
#include <string>

namespace ppos {

// Configuration / input problems (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset validation failures (CLI exit code 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sampler diagnostics outside thresholds (CLI exit code 3).
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Too many invalid replicates in a Monte Carlo run (CLI exit code 4).
struct ReplicateValidityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failures: unreachable inversion targets, undefined conditionals.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ppos
