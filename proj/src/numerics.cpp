#include "c2al/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace c2al {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: inner dimensions differ (" +
                        std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()) + ")");
  }
  Matrix c = a * b;
  ensure_finite(c, "matmul");
  return c;
}

Matrix gram(const Matrix& x) {
  if (x.size() == 0) {
    throw ContractError("gram: empty matrix");
  }
  Matrix g = Matrix::Zero(x.rows(), x.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(x);
  g.triangularView<Eigen::StrictlyUpper>() =
      g.transpose().triangularView<Eigen::StrictlyUpper>();
  ensure_finite(g, "gram");
  return g;
}

double sigmoid(double z) {
  if (std::isnan(z)) {
    throw NumericError("sigmoid: NaN logit");
  }
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  constexpr double hi = 1.0 - 0x1.0p-53;  // largest double below 1
  constexpr double lo = std::numeric_limits<double>::min();
  return std::clamp(p, lo, hi);
}

double bce(double pred, double label) {
  const double p = std::clamp(pred, kProbClamp, 1.0 - kProbClamp);
  return -(label * std::log(p) + (1.0 - label) * std::log1p(-p));
}

double bce_grad(double pred, double label) { return pred - label; }

Vector finite_diff_grad(const std::function<double(const Vector&)>& f,
                        const Vector& at, double eps) {
  if (!(eps > 0.0)) {
    throw ContractError("finite_diff_grad: eps must be positive");
  }
  Vector grad(at.size());
  Vector probe = at;
  for (Index i = 0; i < at.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace c2al
