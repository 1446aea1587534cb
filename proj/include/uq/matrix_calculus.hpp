#pragma once

#include <Eigen/Dense>

namespace uq {

/// d/dt (A + tB)^{-1} at t = 0, i.e. -A^{-1} B A^{-1}.
template <typename Derived1, typename Derived2>
auto inverse_derivative(const Eigen::MatrixBase<Derived1>& a,
                        const Eigen::MatrixBase<Derived2>& b) {
  auto ainv = a.inverse().eval();
  return (-ainv * b * ainv).eval();
}

/// Jacobi's formula: d/dt det(A + tB) at t = 0 equals det(A) tr(A^{-1} B).
template <typename Derived1, typename Derived2>
typename Derived1::Scalar determinant_derivative(
    const Eigen::MatrixBase<Derived1>& a,
    const Eigen::MatrixBase<Derived2>& b) {
  return a.determinant() * (a.inverse() * b).trace();
}

}  // namespace uq
