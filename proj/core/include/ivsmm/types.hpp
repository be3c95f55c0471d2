#pragma once

#include <Eigen/Dense>

namespace ivsmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;
using Eigen::Index;

// Symmetry check for covariance / weight matrices (relative to the largest entry).
bool is_symmetric(const Matrix& m, double rtol = 1e-10);

// 0.5 * (m + m'), used to clean up numerically computed covariances.
Matrix symmetrize(Matrix m);

bool is_binary01(const Vector& v);

}  // namespace ivsmm
