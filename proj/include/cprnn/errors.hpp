#pragma once

#include <stdexcept>
#include <string>

namespace cprnn {

/// Shapes or sizes that do not fit together.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A request outside the regime where a construction is known to be exact,
/// e.g. hidden-size reduction with a nonlinear activation.
class ScopeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or unusable input data (corpus, config values).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or a construction that failed its own certificate.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cprnn
