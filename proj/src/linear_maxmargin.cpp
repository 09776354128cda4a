#include "kktlab/linear_maxmargin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kktlab {

namespace {

// K_ij = y_i y_j <x_i, x_j>
Matrix signed_gram(const Dataset& data) {
  const Vector y = data.y_obs.cast<double>();
  Matrix K = data.X * data.X.transpose();
  K.array().colwise() *= y.array();
  K.array().rowwise() *= y.transpose().array();
  return K;
}

double kkt_residual(const Vector& lambda, const Vector& margins) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double g = 1.0 - margins(i);
    r = std::max(r, lambda(i) > 0.0 ? std::abs(g) : std::max(0.0, g));
  }
  return r;
}

double dual_objective(const Vector& lambda, const Vector& margins) {
  return lambda.sum() - 0.5 * lambda.dot(margins);
}

MarginSolution finish(const Dataset& data, Vector lambda) {
  MarginSolution s;
  const Vector y = data.y_obs.cast<double>();
  s.w = data.X.transpose() * lambda.cwiseProduct(y);
  s.margins = (data.X * s.w).cwiseProduct(y);
  s.objective = s.w.squaredNorm();
  s.lambda = std::move(lambda);
  return s;
}

// Maximizes the dual on the face {lambda_i = 0 for i outside S}. Accepted only
// if the unconstrained face optimum is itself nonnegative, so the dual never
// decreases.
bool polish(const Matrix& K, Vector& lambda, Vector& margins) {
  std::vector<Eigen::Index> S;
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    if (lambda(i) > 0.0) S.push_back(i);
  if (S.empty()) return false;
  const auto s = static_cast<Eigen::Index>(S.size());
  Matrix KS(s, s);
  for (Eigen::Index a = 0; a < s; ++a)
    for (Eigen::Index b = 0; b < s; ++b) KS(a, b) = K(S[a], S[b]);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(KS);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
  const Vector alpha = ldlt.solve(Vector::Ones(s));
  if (!alpha.allFinite() || alpha.minCoeff() < 0.0) return false;
  if ((KS * alpha - Vector::Ones(s)).cwiseAbs().maxCoeff() > 1e-12) return false;
  Vector cand = Vector::Zero(lambda.size());
  for (Eigen::Index a = 0; a < s; ++a) cand(S[a]) = alpha(a);
  const Vector cm = K * cand;
  if (dual_objective(cand, cm) < dual_objective(lambda, margins)) return false;
  lambda = cand;
  margins = cm;
  return true;
}

}  // namespace

MarginSolution solve_max_margin(const Dataset& data, double tol, std::size_t max_iter) {
  LinearSolverOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  return solve_max_margin(data, o);
}

MarginSolution solve_max_margin(const Dataset& data, const LinearSolverOptions& opts) {
  data.validate();
  require(opts.tol > 0.0, "tolerance must be positive");
  require(opts.max_iter >= 1, "max_iter must be >= 1");
  const Matrix K = signed_gram(data);
  const auto n = K.rows();
  const Vector diag = K.diagonal();
  if (diag.minCoeff() <= 0.0) throw InfeasibleSolve("zero example cannot reach margin 1", finish(data, Vector::Zero(n)));
  const double cap = opts.lambda_cap_factor / diag.minCoeff();

  Vector lambda = Vector::Zero(n);
  Vector margins = Vector::Zero(n);
  std::vector<double> history;
  std::size_t sweep = 0;
  bool converged = false;
  while (sweep < opts.max_iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double step = std::max(-lambda(i), (1.0 - margins(i)) / diag(i));
      if (step == 0.0) continue;
      lambda(i) += step;
      margins.noalias() += step * K.col(i);
    }
    ++sweep;
    if (opts.polish_every > 0 && sweep % opts.polish_every == 0) {
      polish(K, lambda, margins);
    }
    // Incremental margins drift; refresh before judging convergence.
    if (kkt_residual(lambda, margins) <= opts.tol) {
      margins = K * lambda;
      if (kkt_residual(lambda, margins) <= opts.tol) converged = true;
    }
    history.push_back(dual_objective(lambda, margins));
    if (converged) break;
    if (lambda.maxCoeff() > cap) {
      MarginSolution best = finish(data, lambda);
      best.iterations = sweep;
      best.dual_history = std::move(history);
      throw InfeasibleSolve("dual multipliers diverged: data not linearly separable", std::move(best));
    }
  }
  MarginSolution s = finish(data, lambda);
  s.iterations = sweep;
  s.dual_history = std::move(history);
  s.converged = converged;
  if (!converged) {
    throw InfeasibleSolve("margins did not reach 1 - tol within max_iter sweeps", std::move(s));
  }
  return s;
}

KktReport verify_linear_kkt(const MarginSolution& sol, const Dataset& data, double tol) {
  require(static_cast<std::size_t>(sol.w.size()) == data.d(), "w has the wrong dimension");
  require(static_cast<std::size_t>(sol.lambda.size()) == data.n(), "lambda has the wrong length");
  const Vector y = data.y_obs.cast<double>();
  const Vector margins = (data.X * sol.w).cwiseProduct(y);
  const Vector recon = data.X.transpose() * sol.lambda.cwiseProduct(y);
  KktReport r;
  const double wn = sol.w.norm();
  const double diff = (sol.w - recon).norm();
  r.stationarity = wn > 0.0 ? diff / wn : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  r.primal_feasibility = margins.minCoeff() - 1.0;
  r.dual_feasibility = sol.lambda.minCoeff();
  const Vector slack = sol.lambda.cwiseProduct((margins.array() - 1.0).abs().matrix());
  r.comp_slack = slack.maxCoeff();
  const double lmax = sol.lambda.cwiseAbs().maxCoeff();
  r.comp_slack_rel = lmax > 0.0 ? r.comp_slack / lmax : 0.0;
  r.passes = r.stationarity <= tol && r.primal_feasibility >= -tol && r.dual_feasibility >= 0.0 &&
             r.comp_slack_rel <= tol;
  return r;
}

double tau_bound_linear(double p, double r_sq) {
  require(p >= 3.0, "tau bound needs p >= 3");
  require(std::isfinite(r_sq) && r_sq >= 1.0, "R^2 must be >= 1");
  if (std::isinf(p)) return r_sq;
  const double pr = p * r_sq;
  require(pr > 2.0, "tau bound undefined for p R^2 <= 2");
  return r_sq * (1.0 + 2.0 / (pr - 2.0));
}

LambdaBounds lambda_bounds_linear(const OrthogonalityProfile& profile, double p) {
  require(p >= 3.0, "multiplier bounds need p >= 3");
  require(profile.r_min_sq > 0.0 && profile.r_max_sq >= profile.r_min_sq,
          "invalid orthogonality profile");
  const double r_sq = profile.r_sq;
  LambdaBounds b;
  if (std::isinf(p)) {
    b.lower = 1.0 / profile.r_max_sq;
    b.upper = 1.0 / profile.r_min_sq;
    return b;
  }
  const double pr = p * r_sq;
  require(pr > 1.0, "multiplier bounds undefined for p R^2 <= 1");
  b.lower = (1.0 - 1.0 / (pr - 1.0)) / profile.r_max_sq;
  b.upper = 1.0 / (profile.r_min_sq * (1.0 - 1.0 / pr));
  return b;
}

MarginSolution brute_force_max_margin(const Dataset& data) {
  data.validate();
  const auto n = static_cast<Eigen::Index>(data.n());
  require(n <= 12, "brute force enumeration is limited to n <= 12");
  const Matrix K = signed_gram(data);
  const Vector y = data.y_obs.cast<double>();

  bool found = false;
  double best_obj = 0.0;
  std::vector<Eigen::Index> best_support;
  Vector best_lambda;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> S;
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask & (1u << i)) S.push_back(i);
    const auto s = static_cast<Eigen::Index>(S.size());
    Eigen::MatrixXd KS(s, s);
    for (Eigen::Index a = 0; a < s; ++a)
      for (Eigen::Index b = 0; b < s; ++b) KS(a, b) = K(S[a], S[b]);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(s);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(KS);
    const Eigen::VectorXd alpha = cod.solve(ones);
    if (!alpha.allFinite()) continue;
    if ((KS * alpha - ones).cwiseAbs().maxCoeff() > 1e-9) continue;  // inconsistent support
    if (alpha.minCoeff() < -1e-12 * std::max(1.0, alpha.cwiseAbs().maxCoeff())) continue;
    Vector lam = Vector::Zero(n);
    for (Eigen::Index a = 0; a < s; ++a) lam(S[a]) = std::max(0.0, alpha(a));
    const Vector m = K * lam;
    if (m.minCoeff() < 1.0 - 1e-9) continue;
    const double obj = lam.dot(m);
    const double tie = 1e-12 * std::max(1.0, std::abs(best_obj));
    if (!found || obj < best_obj - tie ||
        (std::abs(obj - best_obj) <= tie &&
         std::lexicographical_compare(S.begin(), S.end(), best_support.begin(), best_support.end()))) {
      found = true;
      best_obj = obj;
      best_support = S;
      best_lambda = lam;
    }
  }
  if (!found) throw InfeasibleError("no feasible support: data not linearly separable");
  MarginSolution sol = finish(data, best_lambda);
  sol.converged = true;
  return sol;
}

}  // namespace kktlab
