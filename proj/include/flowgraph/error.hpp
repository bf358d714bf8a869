#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flowgraph {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input header does not carry a column required by the declared schema.
class MissingColumn : public Error {
 public:
  explicit MissingColumn(std::string column)
      : Error("missing required column '" + column + "'"), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

/// A data row that cannot be turned into a valid FlowRecord. `row` is the
/// 1-based data row index (header excluded).
class MalformedRow : public Error {
 public:
  MalformedRow(std::size_t row, const std::string& why)
      : Error("malformed row " + std::to_string(row) + ": " + why), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class NonPositiveWidth : public Error {
 public:
  NonPositiveWidth() : Error("snapshot width must be > 0") {}
};

/// Any out-of-range user parameter (eps <= 0, min_pts < 1, ...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class AssignmentMismatch : public Error {
 public:
  AssignmentMismatch(std::size_t got, std::size_t expected)
      : Error("cluster assignment covers " + std::to_string(got) + " points, graph has " +
              std::to_string(expected) + " normal nodes") {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::size_t epoch)
      : Error("non-finite loss at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk artifact (graph, model, manifest).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowgraph
