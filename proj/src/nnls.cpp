#include "kktlab/nnls.hpp"

#include <vector>

#include "kktlab/errors.hpp"

namespace kktlab {

namespace {

Eigen::VectorXd solve_passive(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                              const std::vector<bool>& passive) {
  std::vector<Eigen::Index> P;
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    if (passive[static_cast<std::size_t>(i)]) P.push_back(i);
  const auto p = static_cast<Eigen::Index>(P.size());
  Eigen::MatrixXd HP(p, p);
  Eigen::VectorXd gP(p);
  for (Eigen::Index a = 0; a < p; ++a) {
    gP(a) = g(P[a]);
    for (Eigen::Index b = 0; b < p; ++b) HP(a, b) = H(P[a], P[b]);
  }
  const Eigen::VectorXd zP = HP.completeOrthogonalDecomposition().solve(gP);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(H.rows());
  for (Eigen::Index a = 0; a < p; ++a) z(P[a]) = zP(a);
  return z;
}

}  // namespace

NnlsResult nnls_gram(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, double tol,
                     std::size_t max_iter) {
  const auto n = H.rows();
  require(H.cols() == n && g.size() == n, "nnls: dimension mismatch");
  require(H.allFinite() && g.allFinite(), "nnls: non-finite input");
  if (max_iter == 0) max_iter = 3 * static_cast<std::size_t>(n) + 30;

  NnlsResult r;
  r.x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());

  for (;;) {
    const Eigen::VectorXd w = g - H * r.x;  // negative gradient
    Eigen::Index best = -1;
    double wmax = tol * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && w(i) > wmax) {
        wmax = w(i);
        best = i;
      }
    }
    if (best < 0) {
      r.converged = true;
      return r;
    }
    if (r.iterations >= max_iter) return r;
    passive[static_cast<std::size_t>(best)] = true;

    for (;;) {
      ++r.iterations;
      const Eigen::VectorXd z = solve_passive(H, g, passive);
      bool feasible = true;
      for (Eigen::Index i = 0; i < n; ++i)
        if (passive[static_cast<std::size_t>(i)] && z(i) <= 0.0) feasible = false;
      if (feasible) {
        r.x = z;
        break;
      }
      double alpha = 2.0;
      Eigen::Index hit = best;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && z(i) <= 0.0) {
          const double denom = r.x(i) - z(i);
          const double a = denom > 0.0 ? r.x(i) / denom : 0.0;
          if (a < alpha) {
            alpha = a;
            hit = i;
          }
        }
      }
      r.x += alpha * (z - r.x);
      r.x(hit) = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && r.x(i) <= 0.0) {
          passive[static_cast<std::size_t>(i)] = false;
          r.x(i) = 0.0;
        }
      }
      if (r.iterations >= max_iter) return r;
    }
  }
}

NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol,
                std::size_t max_iter) {
  require(A.rows() == b.size(), "nnls: dimension mismatch");
  const Eigen::MatrixXd H = A.transpose() * A;
  const Eigen::VectorXd g = A.transpose() * b;
  return nnls_gram(H, g, tol, max_iter);
}

}  // namespace kktlab
