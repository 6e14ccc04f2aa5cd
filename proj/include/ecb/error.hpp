#pragma once

#include <stdexcept>
#include <string>

namespace ecb {

// Input that violates a documented invariant (bad CSV, EC row with A=1, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A fit or estimator could not produce a usable number.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ecb
