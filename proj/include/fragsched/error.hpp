#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fragsched {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; the message names the offending line.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that breaks an invariant (non-monotone profile, bad flag value).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// No allocation can serve the named fragments.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::vector<std::string> fragments)
      : Error(what), fragments_(std::move(fragments)) {}

  const std::vector<std::string>& fragments() const { return fragments_; }

 private:
  std::vector<std::string> fragments_;
};

}  // namespace fragsched
