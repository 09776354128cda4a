#include "kktlab/geometry.hpp"

#include <cmath>
#include <limits>

#include "kktlab/errors.hpp"

namespace kktlab {

namespace {

AssumptionEntry entry(std::string name, double lhs, double rhs) {
  AssumptionEntry e;
  e.name = std::move(name);
  e.lhs = lhs;
  e.rhs = rhs;
  e.satisfied = lhs >= rhs;
  e.margin_ratio = rhs != 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity();
  return e;
}

void check_delta_c(double delta, double C) {
  require(delta > 0.0 && delta < 0.5, "delta must lie in (0, 1/2)");
  require(C > 1.0, "C must exceed 1");
}

void check_eigs(const Vector& l) {
  require(l.size() >= 1, "eigenvalue vector is empty");
  require(l.allFinite() && l.minCoeff() >= 0.0, "eigenvalues must be finite and >= 0");
  require(l.maxCoeff() > 0.0, "eigenvalues are all zero");
}

}  // namespace

double OrthogonalityProfile::p_star_or_inf() const {
  return p_star ? *p_star : std::numeric_limits<double>::infinity();
}

bool OrthogonalityProfile::is_p_orthogonal(double p) const {
  return !p_star || p <= *p_star;
}

OrthogonalityProfile orthogonality_profile(const Matrix& X) {
  const auto n = X.rows();
  require(n >= 2, "orthogonality profile needs n >= 2");
  const Matrix G = X * X.transpose();
  OrthogonalityProfile p;
  const Vector diag = G.diagonal();
  p.r_min_sq = diag.minCoeff();
  p.r_max_sq = diag.maxCoeff();
  require(p.r_min_sq > 0.0, "orthogonality profile needs nonzero examples");
  p.r_sq = p.r_max_sq / p.r_min_sq;
  double zeta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) zeta = std::max(zeta, std::abs(G(i, j)));
  p.zeta = zeta;
  if (zeta > 0.0) p.p_star = p.r_min_sq / (p.r_sq * static_cast<double>(n) * zeta);
  return p;
}

OrthogonalityProfile orthogonality_profile(const Dataset& data) {
  return orthogonality_profile(data.X);
}

double uniformity_ratio(const Vector& s) {
  require(s.size() >= 1, "uniformity ratio of an empty vector");
  require(s.allFinite(), "uniformity ratio needs finite entries");
  require(s.minCoeff() > 0.0, "uniformity witness must be strictly positive");
  return s.maxCoeff() / s.minCoeff();
}

bool check_tau_uniform(const Vector& w, const Dataset& data, const Vector& s, double tol) {
  require(static_cast<std::size_t>(w.size()) == data.d(), "w has the wrong dimension");
  require(static_cast<std::size_t>(s.size()) == data.n(), "s has the wrong length");
  if (s.size() == 0 || s.minCoeff() <= 0.0) return false;
  const Vector ys = s.cwiseProduct(data.y_obs.cast<double>());
  const Vector r = w - data.X.transpose() * ys;
  return r.norm() <= tol * w.norm();
}

double stable_rank(const Vector& eigenvalues) {
  check_eigs(eigenvalues);
  const double mx = eigenvalues.maxCoeff();
  return eigenvalues.squaredNorm() / (mx * mx);
}

double effective_rank_ratio(const Vector& eigenvalues) {
  check_eigs(eigenvalues);
  return eigenvalues.sum() / eigenvalues.norm();
}

bool AssumptionReport::all_satisfied() const {
  for (const auto& e : entries)
    if (!e.satisfied) return false;
  return true;
}

AssumptionReport sg_assumption_report(const SgSpec& spec, std::size_t n, double delta, double C) {
  check_delta_c(delta, C);
  spec.validate();
  require(n >= 1, "n must be >= 1");
  const double nn = static_cast<double>(n);
  AssumptionReport r;
  r.entries.push_back(entry("SG1", nn, C * std::log(6.0 / delta)));
  // Sigma_{2:d} is empty for d = 1; its stable rank is then 0.
  const auto d = spec.lambda.size();
  double sr = 0.0;
  if (d > 1 && spec.lambda.tail(d - 1).maxCoeff() > 0.0) sr = stable_rank(spec.lambda.tail(d - 1));
  r.entries.push_back(entry("SG2", sr, C * std::log(6.0 * nn / delta)));
  r.entries.push_back(
      entry("SG3", effective_rank_ratio(spec.lambda), C * nn * std::log(6.0 * nn * nn / delta)));
  return r;
}

AssumptionReport clust_assumption_report(const ClustSpec& spec, std::size_t n, double delta,
                                         double C) {
  check_delta_c(delta, C);
  spec.validate();
  require(n >= 1, "n must be >= 1");
  const double nn = static_cast<double>(n);
  const double k = static_cast<double>(spec.k());
  const double d = static_cast<double>(spec.dim());
  const Matrix M = spec.means * spec.means.transpose();
  const Vector sq = M.diagonal();
  double cross = 0.0;
  for (Eigen::Index q = 0; q < M.rows(); ++q)
    for (Eigen::Index r = q + 1; r < M.rows(); ++r) cross = std::max(cross, std::abs(M(q, r)));
  AssumptionReport r;
  r.entries.push_back(entry("CL1", nn, C * k * k * std::log(k / delta)));
  r.entries.push_back(
      entry("CL2", d, C * std::max(nn * sq.maxCoeff(), nn * nn * std::log(nn / delta))));
  r.entries.push_back(
      entry("CL3", std::sqrt(sq.minCoeff()), C * k * std::sqrt(std::log(2.0 * nn * k / delta))));
  r.entries.push_back(entry("CL4", sq.minCoeff(), C * k * cross));
  return r;
}

}  // namespace kktlab
