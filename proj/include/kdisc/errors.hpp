#pragma once

#include <stdexcept>
#include <string>

namespace kdisc {

// Invalid user input: bad configuration, malformed files, violated
// preconditions. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Numerical breakdown during simulation or solving (non-finite kernel values,
// failed factorizations). The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace kdisc
