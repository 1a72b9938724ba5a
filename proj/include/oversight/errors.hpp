#pragma once

#include <stdexcept>
#include <string>

namespace oversight {

/// Input violates a documented precondition (bad probabilities, zero
/// denominators, reversed incentives, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation could not produce a finite, well-defined answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration (unknown keys, unparsable values).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed CSV/JSON data file.
class DataFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace oversight
