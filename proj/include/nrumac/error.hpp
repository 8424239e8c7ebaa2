#pragma once

#include <stdexcept>
#include <string>

namespace nrumac {

/// Invalid configuration or argument supplied by the caller.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Broken internal invariant (simulation state machine, tape mismatch, ...).
struct InvariantError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Misuse of a stateful API, e.g. stepping a finished episode.
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nrumac
