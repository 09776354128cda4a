#pragma once

#include <cstddef>

#include "kktlab/types.hpp"

namespace kktlab {

struct NnlsResult {
  Vector x;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Lawson-Hanson active set for min ||A x - b|| s.t. x >= 0, given only the
/// normal equations H = A^T A and g = A^T b. Useful when A is tall (m*d rows)
/// but H is small.
NnlsResult nnls_gram(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, double tol = 1e-12,
                     std::size_t max_iter = 0);

NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol = 1e-12,
                std::size_t max_iter = 0);

}  // namespace kktlab
