#pragma once

#include <stdexcept>
#include <string>

namespace lorasim {

/// A caller passed a value outside an operation's domain.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was invoked in a state that does not permit it.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised to a consumer that blocks on a simulated-time queue after the run ended.
class SimulationEnded : public std::runtime_error {
 public:
  SimulationEnded() : std::runtime_error("simulation has ended") {}
};

}  // namespace lorasim
