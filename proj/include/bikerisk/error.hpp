#pragma once

#include <stdexcept>
#include <string>

namespace bikerisk {

// Raised for malformed or inconsistent input data. The CLI maps it to exit
// code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for invalid arguments or configuration (exit code 1 at the CLI).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace bikerisk
