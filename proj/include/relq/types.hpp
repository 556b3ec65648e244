#pragma once

#include <complex>

#include <Eigen/Dense>

namespace relq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Largest absolute entry; 0 for empty matrices.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& x) {
    return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
}

}  // namespace relq
