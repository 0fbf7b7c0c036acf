#pragma once

#include <stdexcept>
#include <string>

namespace foldplan {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Target point outside the reachable annulus.
class ReachError : public Error {
 public:
  using Error::Error;
};

// Geometry or density admits no solution (fold threshold, target draws).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Bad construction parameters (grid size, config values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input state violates a documented precondition (colliding start, bad fold).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Simplified path would exceed the hardware point budget.
class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, double required_epsilon)
      : Error(what), required_epsilon_(required_epsilon) {}

  double required_epsilon() const noexcept { return required_epsilon_; }

 private:
  double required_epsilon_;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed JSON / CSV / config document.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace foldplan
