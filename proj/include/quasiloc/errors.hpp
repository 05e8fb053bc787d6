#pragma once

#include <stdexcept>
#include <string>

namespace quasiloc {

// Precondition violated by the caller.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A ball or fattening left the finite truncation box.
struct TruncationOverflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An infinite lattice sum has no finite enclosure for the given parameters.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Step-size underflow or step budget exhausted in the propagator.
struct IntegrationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// No admissible cone geometry (parallel boundaries, n0 beyond the cap, ...).
struct GeometryInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed experiment configuration; message carries the field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace quasiloc
