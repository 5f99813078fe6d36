#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace c2al {

// Dense f64 storage, row-major. Row-major is also the element order used by
// every on-disk format in this project.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Violated precondition or malformed configuration. The CLI maps this to exit code 2.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values or a failed numerical invariant at runtime. Exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable or corrupt files.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Normalized entropy does not exist on single-class label sets.
struct UndefinedNeError : std::domain_error {
  using std::domain_error::domain_error;
};

template <typename Derived>
void ensure_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entries");
  }
}

// Flattened row-major view of a matrix, copied into a vector.
inline Vector flatten(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

}  // namespace c2al
