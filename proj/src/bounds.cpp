#include "kktlab/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "kktlab/errors.hpp"

namespace kktlab {

namespace {

BoundValue clamp(double raw, double eta, FormulaId id) {
  BoundValue b;
  b.raw = raw;
  b.value = std::min(1.0, std::max(eta, raw));
  b.formula_id = id;
  return b;
}

void check_eta(double eta) {
  require(std::isfinite(eta) && eta >= 0.0 && eta < 0.5, "eta must lie in [0, 1/2)");
}

}  // namespace

std::string to_string(FormulaId f) {
  return f == FormulaId::kSgTest ? "sg_test" : "clust_test";
}

BoundValue sg_test_bound(const Vector& lambda, double eta, double c_prime) {
  require(lambda.size() >= 1 && lambda.allFinite(), "eigenvalues must be finite and nonempty");
  require(lambda(0) > 0.0, "sg bound needs lambda_1 > 0");
  require(c_prime > 0.0, "C' must be positive");
  check_eta(eta);
  const double l1 = lambda(0);
  const double tail = lambda.size() > 1 ? lambda.tail(lambda.size() - 1).squaredNorm() : 0.0;
  double raw = eta;
  if (tail > 0.0) {
    const double r = tail / (l1 * l1);
    raw = eta + c_prime * std::sqrt(r) * (1.0 + std::sqrt(std::max(0.0, 0.5 * std::log(1.0 / r))));
  }
  BoundValue b = clamp(raw, eta, FormulaId::kSgTest);
  b.constants_used = {{"c_prime", c_prime}, {"eta", eta}};
  return b;
}

BoundValue clust_test_bound(const Matrix& means, std::size_t n, std::size_t k, std::size_t d,
                            double eta, double c_prime) {
  require(n >= 1 && k >= 1 && d >= 1, "n, k, d must be >= 1");
  require(means.rows() >= 1, "need at least one mean");
  require(c_prime > 0.0, "C' must be positive");
  check_eta(eta);
  const double mn = means.rowwise().squaredNorm().minCoeff();
  const double kk = static_cast<double>(k);
  const double expo = static_cast<double>(n) * mn * mn / (c_prime * kk * kk * static_cast<double>(d));
  BoundValue b = clamp(eta + std::exp(-expo), eta, FormulaId::kClustTest);
  b.constants_used = {{"c_prime", c_prime}, {"eta", eta}};
  return b;
}

double sg_alignment(const Vector& w, const Vector& lambda) {
  require(w.size() == lambda.size() && w.size() >= 1, "w and lambda must have equal length");
  require(w(0) > 0.0, "alignment needs w_1 > 0");
  require(lambda(0) > 0.0, "alignment needs lambda_1 > 0");
  const auto d = w.size();
  if (d == 1) return 0.0;
  const double tail =
      (lambda.tail(d - 1).cwiseSqrt().cwiseProduct(w.tail(d - 1))).norm();
  return tail / (std::sqrt(lambda(0)) * w(0));
}

std::vector<ClusterExponent> cluster_margin_exponents(const Vector& w, const ClustSpec& spec) {
  require(static_cast<std::size_t>(w.size()) == spec.dim(), "w has the wrong dimension");
  const double wn2 = w.squaredNorm();
  require(wn2 > 0.0, "cluster exponents need w != 0");
  std::vector<ClusterExponent> out;
  const Vector proj = spec.means * w;
  for (Eigen::Index q = 0; q < proj.size(); ++q) {
    ClusterExponent e;
    e.exponent = proj(q) * proj(q) / wn2;
    e.sign = sign_of(static_cast<double>(spec.cluster_labels(q)) * proj(q));
    out.push_back(e);
  }
  return out;
}

double eta_limit_linear() { return 0.49; }

double eta_limit_leaky(double gamma) {
  require(std::isfinite(gamma) && gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  return 0.49 * gamma * gamma;
}

}  // namespace kktlab
