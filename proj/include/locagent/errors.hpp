#pragma once

#include <stdexcept>
#include <string>

namespace locagent {

// Raised when a caller breaks an operation's precondition (programming error).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed user input: config, manifest, checkpoint, image file.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while executing an otherwise valid request (e.g. diverging loss).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace locagent
