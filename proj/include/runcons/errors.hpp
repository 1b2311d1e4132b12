#pragma once

#include <stdexcept>

namespace runcons {

// Malformed or inconsistent configuration / serialized input.
class schema_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: factorization breakdown, ill-conditioning, etc.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Too few usable data points for an estimator.
class insufficient_data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace runcons
