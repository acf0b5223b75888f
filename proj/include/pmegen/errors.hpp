#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmegen {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression node (wrong arity, empty identifier).
class StructuralError : public Error {
public:
  using Error::Error;
};

/// Syntax or validation failure in an operation description.
class ParseError : public Error {
public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error(format(line, column, what)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  static std::string format(std::size_t line, std::size_t column, const std::string& what) {
    if (line == 0) return what;
    return std::to_string(line) + ":" + std::to_string(column) + ": " + what;
  }
  std::size_t line_;
  std::size_t column_;
};

class NonConformantError : public Error {
public:
  using Error::Error;
};

class NoViablePartitionings : public Error {
public:
  using Error::Error;
};

class ContractViolation : public Error {
public:
  using Error::Error;
};

class NumericError : public Error {
public:
  using Error::Error;
};

class KnowledgeBaseError : public Error {
public:
  using Error::Error;
};

/// One equation the engine could not solve, plus why.
struct StuckEquation {
  std::string position;
  std::string equation;              // infix text
  std::vector<std::string> reasons;  // unmet guards / missing patterns
};

class StuckDerivation : public Error {
public:
  StuckDerivation(std::string operation, std::vector<StuckEquation> remaining)
      : Error(describe(operation, remaining)), operation_(std::move(operation)),
        remaining_(std::move(remaining)) {}

  const std::string& operation() const noexcept { return operation_; }
  const std::vector<StuckEquation>& remaining() const noexcept { return remaining_; }

  static std::string describe(const std::string& operation,
                              const std::vector<StuckEquation>& remaining) {
    std::string out = "stuck derivation for '" + operation + "'";
    for (const auto& r : remaining) {
      out += "\n  " + r.position + ": " + r.equation;
      for (const auto& why : r.reasons) out += "\n    - " + why;
    }
    return out;
  }

private:
  std::string operation_;
  std::vector<StuckEquation> remaining_;
};

}  // namespace pmegen
