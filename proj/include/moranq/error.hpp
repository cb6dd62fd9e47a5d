#pragma once

#include <stdexcept>
#include <string>

namespace moranq {

/// Malformed or inadmissible input data (spec files, words out of range).
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The spec document could not be parsed at all (not JSON).
class SpecParseError : public SpecError {
 public:
  using SpecError::SpecError;
};

/// A configurable size guard (atom count, antichain cardinality, oracle size)
/// was exceeded.
class ResourceLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an operation's precondition.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The discretization is too coarse for the requested codebook size.
class AdequacyError : public std::runtime_error {
 public:
  AdequacyError(const std::string& what, int required_depth)
      : std::runtime_error(what), required_depth_(required_depth) {}

  int required_depth() const { return required_depth_; }

 private:
  int required_depth_;
};

}  // namespace moranq
