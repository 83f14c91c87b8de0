#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nlsel {

/// Base of every error thrown by the library.  `kind()` is a stable tag used
/// in the structured error JSON written by the CLI.
class Error : public std::runtime_error {
  public:
    Error(std::string kind, const std::string &what) : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string &kind() const noexcept { return kind_; }

  private:
    std::string kind_;
};

class NonFinite : public Error {
  public:
    explicit NonFinite(const std::string &what) : Error("NonFinite", what) {}
};

class ConstantColumn : public Error {
  public:
    explicit ConstantColumn(int column)
        : Error("ConstantColumn", "column " + std::to_string(column) + " has zero variance"), column_(column) {}
    int column() const noexcept { return column_; }

  private:
    int column_;
};

class SingularGram : public Error {
  public:
    explicit SingularGram(const std::string &what) : Error("SingularGram", what) {}
};

class SingularHessian : public Error {
  public:
    explicit SingularHessian(const std::string &what) : Error("SingularHessian", what) {}
};

class DomainError : public Error {
  public:
    explicit DomainError(const std::string &what) : Error("DomainError", what) {}
};

class DimensionTooLarge : public Error {
  public:
    explicit DimensionTooLarge(const std::string &what) : Error("DimensionTooLarge", what) {}
};

class AllNegInfinity : public Error {
  public:
    AllNegInfinity() : Error("AllNegInfinity", "every candidate has log score -inf") {}
};

class EmptyLedger : public Error {
  public:
    EmptyLedger() : Error("EmptyLedger", "ledger holds no model with a finite score") {}
};

class ParseError : public Error {
  public:
    ParseError(std::size_t line, std::size_t column, const std::string &what)
        : Error("ParseError", "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line), column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

  private:
    std::size_t line_, column_;
};

class UsageError : public Error {
  public:
    explicit UsageError(const std::string &what) : Error("UsageError", what) {}
};

} // namespace nlsel
