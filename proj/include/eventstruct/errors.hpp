#pragma once

#include <stdexcept>
#include <string>

namespace eventstruct {

// Every library failure derives from Error. The category drives CLI exit codes.
enum class ErrorCategory { data, compute };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(ErrorCategory::data,
              line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

struct ConsistencyError : Error {
  explicit ConsistencyError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

// Graph construction failed: an annotation has no variable to attach to.
struct ConstructionError : Error {
  explicit ConstructionError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorCategory::compute, what) {}
};

struct CapacityError : Error {
  explicit CapacityError(const std::string& what) : Error(ErrorCategory::compute, what) {}
};

// Agreement is undefined for the given data (too few pairable values, or
// no expected disagreement).
struct UndefinedAgreement : Error {
  explicit UndefinedAgreement(const std::string& what) : Error(ErrorCategory::compute, what) {}
};

}  // namespace eventstruct
