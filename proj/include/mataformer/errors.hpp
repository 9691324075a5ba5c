#pragma once

#include <stdexcept>
#include <string>

namespace mata {

// Malformed or invalid input data (files, records, configs). CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf or other numeric breakdown during evaluation. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mata
