#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace cgrom {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Raised when a caller breaks a documented precondition (dimension
/// mismatch, insufficient history, invalid scheme coefficients, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a numerical procedure cannot produce a usable result.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message);

/// Parameter vector of a full-order model (entries are problem specific).
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(std::initializer_list<double> values);
  explicit ParamVector(Vector values);
  explicit ParamVector(const std::vector<double>& values);

  [[nodiscard]] Index size() const noexcept { return values_.size(); }
  [[nodiscard]] double operator[](Index i) const { return values_[i]; }
  [[nodiscard]] const Vector& values() const noexcept { return values_; }
  [[nodiscard]] std::string to_string() const;

 private:
  Vector values_;
};

/// Partition of a state vector into contiguous named 1-D fields.
class FieldLayout {
 public:
  struct Field {
    std::string name;
    Index offset = 0;
    Index length = 0;
  };

  FieldLayout() = default;
  explicit FieldLayout(std::vector<Field> fields);
  /// A single field covering `dim` entries.
  static FieldLayout single(Index dim, std::string name = "state");
  /// One field per name, each `length` entries long.
  static FieldLayout uniform(std::vector<std::string> names, Index length);

  [[nodiscard]] const std::vector<Field>& fields() const noexcept { return fields_; }
  [[nodiscard]] std::size_t size() const noexcept { return fields_.size(); }
  [[nodiscard]] const Field& operator[](std::size_t i) const { return fields_.at(i); }
  [[nodiscard]] Index dim() const noexcept;

 private:
  std::vector<Field> fields_;
};

}  // namespace cgrom
