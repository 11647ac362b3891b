#pragma once

#include <stdexcept>
#include <string>

namespace qdspin {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid argument value (negative power, out-of-range probability, ...).
struct DomainError : Error {
  using Error::Error;
};

// Value outside a configured operating range (bias voltage, ...).
struct RangeError : Error {
  using Error::Error;
};

// Ill-formed pulse sequence (overlap, ordering, period bounds).
struct SequenceError : Error {
  using Error::Error;
};

// Power calibration failed to converge.
struct CalibrationError : Error {
  using Error::Error;
};

// Strict config parsing failure.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace qdspin
