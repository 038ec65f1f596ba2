#pragma once

#include <Eigen/Dense>

namespace qrt {

// Feature matrices are n rows (observations) by d columns (features).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace qrt
