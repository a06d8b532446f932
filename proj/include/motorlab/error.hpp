#pragma once

#include <stdexcept>
#include <string>

namespace motorlab {

/// Raised when a computation produces NaN/Inf or a simulated state blows up.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on shape mismatches and violated preconditions.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace motorlab
