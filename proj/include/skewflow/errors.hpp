#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace skewflow {

/// A state lies outside the domain an operation is defined on.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A partial semi-flow was asked to flow past the exit face.
class ExitTimeExceeded : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Caller violated an operation precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown by junction switches whose lateral kick is too small or too close to
/// a basin boundary for the exit branch to be read off reliably.
class IndeterminateSwitch : public std::runtime_error {
 public:
  IndeterminateSwitch(const std::string& what, std::size_t junction)
      : std::runtime_error(what), junction_(junction) {}
  std::size_t junction() const noexcept { return junction_; }

 private:
  std::size_t junction_;
};

/// Empirical conditional with an empty conditioning set.
class UndefinedConditional : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace skewflow
