#pragma once

#include <stdexcept>

namespace roadsr {

/// Raised when a caller breaks an operation's precondition.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by winner_take_all when a point carries no votes.
class UnobservedPointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a file cannot be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a file is readable but not in the expected format.
class FormatError : public ContractError {
 public:
  using ContractError::ContractError;
};

}  // namespace roadsr
