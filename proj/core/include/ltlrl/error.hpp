#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ltlrl {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& message)
      : Error("parse error at position " + std::to_string(position) + ": " + message),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class UnknownAtomError : public Error {
 public:
  explicit UnknownAtomError(std::string atom)
      : Error("unknown atomic proposition '" + atom + "'"), atom_(std::move(atom)) {}

  const std::string& atom() const noexcept { return atom_; }

 private:
  std::string atom_;
};

class UnsupportedFragment : public Error {
 public:
  explicit UnsupportedFragment(std::string subformula)
      : Error("formula outside the compilable fragment: " + subformula),
        subformula_(std::move(subformula)) {}

  const std::string& subformula() const noexcept { return subformula_; }

 private:
  std::string subformula_;
};

class HoaError : public Error {
 public:
  enum class Kind { MalformedHeader, Nondeterministic, Incomplete, UnsupportedAcceptance, Syntax };

  HoaError(Kind kind, const std::string& message) : Error(describe(kind) + ": " + message), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  static std::string describe(Kind kind) {
    switch (kind) {
      case Kind::MalformedHeader: return "malformed-header";
      case Kind::Nondeterministic: return "nondeterminism-detected";
      case Kind::Incomplete: return "incompleteness-detected";
      case Kind::UnsupportedAcceptance: return "unsupported-acceptance";
      case Kind::Syntax: return "hoa-syntax";
    }
    return "hoa";
  }

  Kind kind_;
};

// Raised when the initial automaton state cannot reach acceptance after pruning.
class InfeasibleTask : public Error {
 public:
  using Error::Error;
};

class SamplingBudgetExceeded : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace ltlrl
