#include <doctest.h>

#include <cmath>
#include <random>

#include "kktlab/errors.hpp"
#include "kktlab/geometry.hpp"

using namespace kktlab;

TEST_CASE("orthogonality profile examples") {
  const Matrix E = Matrix::Identity(4, 4);
  const auto p = orthogonality_profile(E);
  CHECK(p.zeta == 0.0);
  CHECK(!p.p_star.has_value());
  CHECK(std::isinf(p.p_star_or_inf()));
  CHECK(p.is_p_orthogonal(1e300));

  Matrix X(2, 2);
  X << 1, 0, 0.1, 1;
  const auto q = orthogonality_profile(X);
  CHECK(q.r_min_sq == 1.0);
  CHECK(q.r_max_sq == doctest::Approx(1.01));
  CHECK(q.zeta == doctest::Approx(0.1));
  CHECK(*q.p_star == doctest::Approx(1.0 / (1.01 * 2 * 0.1)));
  CHECK(*q.p_star == doctest::Approx(4.9505).epsilon(1e-4));
  CHECK(*q.p_star * q.r_sq * 2 * q.zeta == doctest::Approx(q.r_min_sq));
  CHECK(q.is_p_orthogonal(*q.p_star));
  CHECK(!q.is_p_orthogonal(*q.p_star * (1 + 1e-12)));

  Matrix same(2, 3);
  same << 1, 0, 0, 1, 0, 0;
  CHECK(*orthogonality_profile(same).p_star == doctest::Approx(0.5));

  CHECK_THROWS_AS(orthogonality_profile(Matrix::Ones(1, 3)), ValidationError);
}

TEST_CASE("profile is permutation and rotation invariant") {
  std::mt19937_64 g(3);
  std::normal_distribution<double> nd;
  Matrix X(6, 5);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = nd(g);
  const auto p = orthogonality_profile(X);
  Matrix P = X;
  P.row(0).swap(P.row(4));
  const auto pp = orthogonality_profile(P);
  CHECK(*pp.p_star == doctest::Approx(*p.p_star).epsilon(1e-14));
  Eigen::MatrixXd A(5, 5);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = nd(g);
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(A).householderQ();
  const Matrix R = X * Q;
  const auto pr = orthogonality_profile(R);
  CHECK(*pr.p_star == doctest::Approx(*p.p_star).epsilon(1e-12));
  CHECK(pr.r_sq == doctest::Approx(p.r_sq).epsilon(1e-12));
}

TEST_CASE("uniformity ratio") {
  CHECK(uniformity_ratio(Vector::Constant(5, 0.3)) == 1.0);
  CHECK(uniformity_ratio((Vector(3) << 1, 2, 4).finished()) == 4.0);
  CHECK_THROWS_AS(uniformity_ratio((Vector(3) << 1, 0, 4).finished()), ValidationError);
  const Vector s = (Vector(4) << 0.2, 0.7, 1.1, 0.5).finished();
  CHECK(uniformity_ratio(3.7 * s) == doctest::Approx(uniformity_ratio(s)));
}

TEST_CASE("tau uniform check") {
  Matrix X(1, 2);
  X << 2, 1;
  const Dataset one = Dataset::from_labels(X, (IntVector(1) << -1).finished());
  const Vector w = -X.row(0).transpose();
  CHECK(check_tau_uniform(w, one, Vector::Ones(1), 0.0));

  Matrix X2(2, 2);
  X2 << 1, 0, 0, 1;
  const Dataset two = Dataset::from_labels(X2, (IntVector(2) << 1, 1).finished());
  const Vector w2 = (Vector(2) << 1, -1).finished();
  CHECK(!check_tau_uniform(w2, two, Vector::Ones(2), 1e-8));
  CHECK_THROWS_AS(check_tau_uniform(Vector::Ones(3), two, Vector::Ones(2), 1e-8), ValidationError);
}

TEST_CASE("stable rank and effective rank ratio") {
  CHECK(stable_rank(Vector::Ones(7)) == doctest::Approx(7.0));
  const double d = 100;
  Vector tail = Vector::Ones(99);
  tail(0) = std::sqrt(d);
  CHECK(stable_rank(tail) == doctest::Approx(1.98));
  CHECK(stable_rank((Vector(3) << 5, 0, 0).finished()) == 1.0);
  CHECK_THROWS_AS(stable_rank(Vector::Zero(3)), ValidationError);

  CHECK(effective_rank_ratio(Vector::Ones(64)) == doctest::Approx(8.0));
  Vector l = Vector::Ones(10000);
  l(0) = 1000.0;
  CHECK(effective_rank_ratio(l) == doctest::Approx(10.944).epsilon(1e-4));
  CHECK(effective_rank_ratio((Vector(2) << 1e12, 1).finished()) == doctest::Approx(1.0));
  CHECK(stable_rank(2.5 * l) == doctest::Approx(stable_rank(l)));
  CHECK(effective_rank_ratio(2.5 * l) == doctest::Approx(effective_rank_ratio(l)));
}

TEST_CASE("sub-Gaussian assumption report") {
  // Identity covariance: SG3 holds once sqrt(d) >= C n log(6 n^2 / delta).
  const std::size_t n = 10;
  const double delta = 0.1, C = 2.0;
  const double need = C * n * std::log(6.0 * n * n / delta);
  const auto d = static_cast<std::size_t>(std::ceil(need * need));
  SgSpec s;
  s.lambda = Vector::Ones(static_cast<Eigen::Index>(d));
  s.eta = 0.1;
  const auto ok = sg_assumption_report(s, n, delta, C);
  REQUIRE(ok.entries.size() == 3);
  CHECK(ok.entries[0].name == "SG1");
  CHECK(ok.entries[2].lhs == doctest::Approx(std::sqrt(static_cast<double>(d))));
  CHECK(ok.all_satisfied());

  const auto one = sg_assumption_report(s, 1, 0.1, 10.0);
  CHECK(!one.entries[0].satisfied);
  CHECK(one.entries[0].rhs == doctest::Approx(10 * std::log(60.0)));

  // diag(d, d^(1/4), 1, ..., 1): SG2 holds, SG3 fails.
  const double dd = 1e6;
  SgSpec t;
  t.lambda = Vector::Ones(1000000);
  t.lambda(0) = dd;
  t.lambda(1) = std::pow(dd, 0.25);
  t.eta = 0.1;
  const auto r = sg_assumption_report(t, 10, 0.1, 2.0);
  CHECK(r.entries[1].satisfied);
  CHECK(!r.entries[2].satisfied);

  CHECK_THROWS_AS(sg_assumption_report(s, n, 0.6, C), ValidationError);
  CHECK_THROWS_AS(sg_assumption_report(s, n, 0.1, 1.0), ValidationError);
}

TEST_CASE("cluster assumption report") {
  IntVector l(2);
  l << 1, -1;
  const ClustSpec orth = ClustSpec::orthogonal(50, 2, 1.0, 0.1, l);
  const auto r = clust_assumption_report(orth, 1000, 0.1, 10.0);
  REQUIRE(r.entries.size() == 4);
  CHECK(r.entries[3].name == "CL4");
  CHECK(r.entries[3].satisfied);  // exactly orthogonal means
  CHECK(!r.entries[2].satisfied);
  CHECK(r.entries[2].rhs == doctest::Approx(10 * 2 * std::sqrt(std::log(2.0 * 1000 * 2 / 0.1))));

  // Setting (ii): ||mu|| ~ d^(1/3), cross terms ~ d^(3/5), n ~ d^(1/5), k ~ d^0.05.
  const double d = 1e5;
  const auto k = static_cast<Eigen::Index>(std::round(std::pow(d, 0.05)));
  ClustSpec c;
  c.means = Matrix::Zero(k, 100000);
  const double norm = std::pow(d, 1.0 / 3.0);
  const double cross = std::pow(d, 0.6);
  // Shared component s along the last axis gives <mu_q, mu_r> = s^2.
  const double s = std::sqrt(cross);
  for (Eigen::Index q = 0; q < k; ++q) {
    c.means(q, q) = std::sqrt(norm * norm - s * s > 0 ? norm * norm - s * s : 0.0);
    c.means(q, 99999) = s;
  }
  c.cluster_labels = IntVector::Ones(k);
  c.cluster_labels(1) = -1;
  const auto rep = clust_assumption_report(c, static_cast<std::size_t>(std::pow(d, 0.2)), 0.1, 2.0);
  CHECK(rep.entries.size() == 4);
  for (const auto& e : rep.entries) CHECK(e.satisfied == (e.lhs >= e.rhs));
}
