#pragma once

#include <functional>

#include "c2al/types.hpp"

namespace c2al {

// Predictions are clamped into [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-12;

// Checked product a * b.
Matrix matmul(const Matrix& a, const Matrix& b);

// x * x^T. Each off-diagonal pair is computed once and mirrored, so the
// result is symmetric to the bit.
Matrix gram(const Matrix& x);

// Stable logistic; output strictly inside (0, 1) even for |z| up to 700.
double sigmoid(double z);

// Binary cross-entropy of a clamped probability against a 0/1 label.
double bce(double pred, double label);

// Gradient of bce(sigmoid(z), label) with respect to the logit z.
double bce_grad(double pred, double label);

// Central-difference gradient, one coordinate at a time. The oracle every
// analytic backward pass in this project is validated against.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f,
                        const Vector& at, double eps = 1e-6);

}  // namespace c2al
