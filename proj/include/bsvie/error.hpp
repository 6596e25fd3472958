#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bsvie {

/// Invalid arguments or malformed input detected before any computation.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Field/grid/ensemble dimensions do not agree.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Normal equations of a regression are singular even after the ridge term.
class RegressionError : public std::runtime_error {
 public:
  RegressionError(const std::string& what, std::ptrdiff_t node)
      : std::runtime_error(what), node_(node) {}
  std::ptrdiff_t node() const noexcept { return node_; }

 private:
  std::ptrdiff_t node_;
};

/// Non-finite value produced while evaluating a generator or terminal.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::ptrdiff_t row, std::ptrdiff_t col)
      : std::runtime_error(what), row_(row), col_(col) {}
  std::ptrdiff_t row() const noexcept { return row_; }
  std::ptrdiff_t col() const noexcept { return col_; }

 private:
  std::ptrdiff_t row_;
  std::ptrdiff_t col_;
};

}  // namespace bsvie
