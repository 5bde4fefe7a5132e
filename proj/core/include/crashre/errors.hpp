#ifndef CRASHRE_ERRORS_HPP_
#define CRASHRE_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace crashre {

// Broad failure classes. The CLI maps these onto its exit codes.
enum class ErrorCategory {
  kUsage,
  kValidation,
  kRuntime,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what),
        category_(category),
        module_(std::move(module)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorCategory category_;
  std::string module_;
};

// A mandatory column is not present in the input header.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::string column)
      : Error(ErrorCategory::kValidation, "data_model", what),
        column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

// A cell could not be parsed, or a parsed value violates its codomain.
// `row` is the 1-based data row (the header is not counted).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::string column)
      : Error(ErrorCategory::kValidation, "data_model", what),
        row_(row),
        column_(std::move(column)) {}
  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class ValidationError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Approach labels of one intersection cannot be mapped onto distinct legs.
class OrientationError : public Error {
 public:
  OrientationError(const std::string& what, std::string intersection)
      : Error(ErrorCategory::kValidation, "data_model", what),
        intersection_(std::move(intersection)) {}
  const std::string& intersection() const noexcept { return intersection_; }

 private:
  std::string intersection_;
};

class ExposureError : public Error {
 public:
  ExposureError(const std::string& what, std::string field)
      : Error(ErrorCategory::kValidation, "design", what),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Bad model or run specification (unknown covariate, invalid prior, ...).
class SpecError : public Error {
 public:
  explicit SpecError(const std::string& what, std::string module = "design")
      : Error(ErrorCategory::kValidation, std::move(module), what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what, std::string module = "negbin")
      : Error(ErrorCategory::kRuntime, std::move(module), what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what,
                        std::string module = "model_core")
      : Error(ErrorCategory::kRuntime, std::move(module), what) {}
};

// The linear predictor left the representable range (|eta| > 700).
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::string state_report)
      : NumericError(what), state_report_(std::move(state_report)) {}
  const std::string& state_report() const noexcept { return state_report_; }

 private:
  std::string state_report_;
};

// A trace carries no variation, so a diagnostic is undefined.
class DegenerateChainError : public Error {
 public:
  explicit DegenerateChainError(const std::string& what)
      : Error(ErrorCategory::kRuntime, "diagnostics", what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what, std::string module = "cli")
      : Error(ErrorCategory::kUsage, std::move(module), what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what, std::string module = "io")
      : Error(ErrorCategory::kRuntime, std::move(module), what) {}
};

}  // namespace crashre

#endif  // CRASHRE_ERRORS_HPP_
