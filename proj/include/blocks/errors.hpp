#pragma once

#include <stdexcept>
#include <string>

namespace bw {

/// Bad input: malformed files, violated preconditions, unknown ids.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values produced during optimization or evaluation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bw
