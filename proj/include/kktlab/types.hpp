#pragma once

#include <Eigen/Dense>

namespace kktlab {

// Row-major so that one example (or one neuron) is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

// Artifact-wide tie rule: sign(0) = +1.
inline int sign_of(double v) { return v >= 0.0 ? 1 : -1; }

}  // namespace kktlab
