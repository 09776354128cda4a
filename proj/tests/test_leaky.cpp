#include <doctest.h>

#include <cmath>
#include <random>

#include "kktlab/dataset.hpp"
#include "kktlab/eval.hpp"
#include "kktlab/geometry.hpp"
#include "kktlab/leaky_net.hpp"
#include "kktlab/linear_maxmargin.hpp"

using namespace kktlab;

namespace {

Matrix randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& g, double s = 1.0) {
  std::normal_distribution<double> z(0.0, s);
  Matrix M(r, c);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = z(g);
  return M;
}

// Near-orthogonal data: scaled basis vectors plus a small perturbation.
Dataset near_basis(int n, int d, double eps, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  Matrix X = randn(n, d, g, eps);
  IntVector y(n);
  for (int i = 0; i < n; ++i) {
    X(i, i) += 1.0 + 0.05 * (i % 3);
    y(i) = i % 2 == 0 ? 1 : -1;
  }
  return Dataset::from_labels(X, y);
}

}  // namespace

TEST_CASE("network construction") {
  const auto z = init_network(4, 3, 0.5, 0.0, 1);
  CHECK(z.W().norm() == 0.0);
  CHECK(forward(z, Vector::Ones(3)) == 0.0);
  const auto two = init_network(2, 5, 0.5, 1.0, 1);
  CHECK(two.a()(0) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(two.a()(1) == doctest::Approx(-1 / std::sqrt(2.0)));
  const auto wide = init_network(64, 100, 0.5, 1.0, 2);
  CHECK(wide.W().rowwise().squaredNorm().mean() == doctest::Approx(1.0).epsilon(0.25));
  CHECK(wide.a().sum() == doctest::Approx(0.0));
  CHECK_THROWS_AS(init_network(3, 5, 0.5, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(init_network(4, 5, 0.0, 1.0, 1), ValidationError);
  CHECK(init_network(8, 20, 0.5, 1.0, 9).W() == init_network(8, 20, 0.5, 1.0, 9).W());
}

TEST_CASE("forward examples and invariants") {
  std::mt19937_64 g(1);
  const Matrix W = randn(6, 4, g);
  const NetworkParams lin(W, 1.0);
  const Vector x = randn(4, 1, g).col(0);
  const Vector collapse = W.transpose() * lin.a();
  CHECK(forward(lin, x) == doctest::Approx(collapse.dot(x)).epsilon(1e-14));

  const Vector x2 = (Vector(2) << 3.0, 4.0).finished();
  Matrix W2(2, 2);
  W2.row(0) = x2.transpose() / x2.squaredNorm();
  W2.row(1) = -x2.transpose() / x2.squaredNorm();
  CHECK(forward(NetworkParams(W2, 0.5), x2) == doctest::Approx(1.5 / std::sqrt(2.0)));

  const NetworkParams net(W, 0.3);
  for (double c : {0.0, 0.5, 2.0, 17.0}) {
    CHECK(forward(net.with_weights(c * W), x) == doctest::Approx(c * forward(net, x)).epsilon(1e-13));
  }
  const Matrix X = randn(5, 4, g);
  const Vector fb = forward_batch(net, X);
  for (int i = 0; i < 5; ++i) CHECK(fb(i) == doctest::Approx(forward(net, X.row(i).transpose())));
}

TEST_CASE("loss values") {
  const Dataset ds = sample_sg(SgSpec::gaussian_spiked(10, 0.5, 0.1), 8, 1);
  const auto zero = init_network(4, 10, 0.5, 0.0, 1);
  CHECK(loss_and_grad(zero, ds, Loss::kLogistic).loss == doctest::Approx(std::log(2.0)));
  CHECK(loss_and_grad(zero, ds, Loss::kExponential).loss == doctest::Approx(1.0));

  // All margins equal M: a single example.
  Matrix X(1, 2);
  X << 1.0, 0.0;
  const Dataset one = Dataset::from_labels(X, IntVector::Ones(1));
  Matrix W(2, 2);
  W << 3.0, 0.0, -1.0, 0.0;
  const NetworkParams net(W, 0.5);
  const double M = forward(net, X.row(0).transpose());
  CHECK(loss_and_grad(net, one, Loss::kExponential).loss == doctest::Approx(std::exp(-M)));
  // Large margins do not overflow or vanish in log space.
  const auto big = loss_and_grad(net.with_weights(1e4 * W), one, Loss::kLogistic);
  CHECK(std::isfinite(big.log_loss));
  CHECK(big.log_loss == doctest::Approx(-1e4 * M));
}

TEST_CASE("gradient matches central differences") {
  std::mt19937_64 g(11);
  int points = 0;
  double worst = 0.0;
  while (points < 100) {
    const int m = 4, d = 5, n = 6;
    Matrix X = randn(n, d, g);
    IntVector y(n);
    for (int i = 0; i < n; ++i) y(i) = (g() & 1) ? 1 : -1;
    const Dataset ds = Dataset::from_labels(X, y);
    const NetworkParams net(randn(m, d, g), 0.4);
    const Matrix P = net.W() * X.transpose();
    if (P.cwiseAbs().minCoeff() < 1e-3) continue;  // keep away from kinks
    const Loss loss = points % 2 ? Loss::kLogistic : Loss::kExponential;
    const auto lg = loss_and_grad(net, ds, loss);
    const double h = 1e-6;
    Matrix fd(m, d);
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < d; ++k) {
        Matrix Wp = net.W(), Wm = net.W();
        Wp(j, k) += h;
        Wm(j, k) -= h;
        fd(j, k) = (loss_and_grad(net.with_weights(Wp), ds, loss).loss -
                    loss_and_grad(net.with_weights(Wm), ds, loss).loss) / (2 * h);
      }
    }
    const double rel = (fd - lg.grad).norm() / std::max(lg.grad.norm(), 1e-12);
    worst = std::max(worst, rel);
    ++points;
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("trainer equals naive full-space gradient descent") {
  const Dataset ds = sample_sg(SgSpec::gaussian_spiked(40, 0.5, 0.2), 6, 3);
  const auto init = init_network(4, 40, 0.5, 0.5, 3);
  TrainConfig cfg;
  cfg.max_steps = 25;
  cfg.checkpoint_every = 5;
  NetworkParams got;
  try {
    got = train_to_margin(init, ds, cfg).params;
  } catch (const TrainingFailureWithTrace& e) {
    got = e.last();
  }
  const double lr = 0.5 / ds.X.rowwise().squaredNorm().maxCoeff();
  NetworkParams cur = init;
  for (int t = 0; t < 25; ++t) {
    const auto lg = loss_and_grad(cur, ds, cfg.loss);
    double eta = lr / lg.loss;
    for (int bt = 0; bt <= 40; ++bt) {
      const auto cand = cur.with_weights(cur.W() - eta * lg.grad);
      if (loss_and_grad(cand, ds, cfg.loss).log_loss <= lg.log_loss) {
        cur = cand;
        break;
      }
      eta *= 0.5;
    }
  }
  CHECK((got.W() - cur.W()).norm() <= 1e-9 * cur.W().norm());
}

TEST_CASE("training interpolates P_gaus data and keeps the risk monotone") {
  const Dataset ds = sample_sg(SgSpec::gaussian_spiked(2000, 0.75, 0.1), 16, 4);
  const auto init = init_network(32, 2000, 0.5, 1e-6, 4);
  TrainConfig cfg;
  cfg.max_steps = 20000;
  const auto res = train_to_margin(init, ds, cfg);
  const auto ic = interpolation_check(Predictor{res.params}, ds);
  CHECK(ic.interpolates);
  CHECK(res.trace.points.size() >= 2);
  for (std::size_t k = 1; k < res.trace.points.size(); ++k) {
    CHECK(res.trace.points[k].step > res.trace.points[k - 1].step);
    CHECK(res.trace.points[k].log_loss <= res.trace.points[k - 1].log_loss);
  }
  CHECK(res.trace.points.back().log_loss < std::log(std::log(2.0) / 16));
}

TEST_CASE("single example: normalized margin approaches the analytic maximum") {
  Matrix X(1, 3);
  X << 1.0, 2.0, -0.5;
  const Dataset ds = Dataset::from_labels(X, IntVector::Ones(1));
  const double gamma = 0.5;
  const auto init = init_network(2, 3, gamma, 0.1, 5);
  TrainConfig cfg;
  cfg.max_steps = 20000;
  cfg.min_steps = 5000;
  const auto res = train_to_margin(init, ds, cfg);
  // Unit-margin KKT point has ||W||^2 = 2 / ((1 + gamma^2) ||x||^2).
  const double best = X.norm() * std::sqrt((1 + gamma * gamma) / 2.0);
  CHECK(res.trace.points.back().min_normalized_margin == doctest::Approx(best).epsilon(1e-3));
  const auto cert = extract_net_kkt(res.params, ds);
  CHECK(cert.passes);
}

TEST_CASE("non-separable data fails to train") {
  Matrix X(2, 2);
  X << 1, 0, 1, 0;
  const Dataset ds = Dataset::from_labels(X, (IntVector(2) << 1, -1).finished());
  TrainConfig cfg;
  cfg.max_steps = 2000;
  CHECK_THROWS_AS(train_to_margin(init_network(4, 2, 0.5, 0.1, 1), ds, cfg), TrainingFailure);
}

TEST_CASE("rescale to unit margin") {
  Matrix X(1, 2);
  X << 1, 0;
  const Dataset ds = Dataset::from_labels(X, IntVector::Ones(1));
  Matrix W(2, 2);
  W << 4 * std::sqrt(2.0), 0, 0, 0;
  const NetworkParams net(W, 0.5);
  const auto r = rescale_to_unit_margin(net, ds);
  CHECK(r.W()(0, 0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(rescale_to_unit_margin(r, ds).W() == r.W());
  CHECK_THROWS_AS(rescale_to_unit_margin(net.with_weights(-0.1 / 4 * W), ds), ValidationError);
}

TEST_CASE("KKT extraction: hand-built single-point KKT point") {
  Matrix X(1, 2);
  X << 1, 0;
  const Dataset ds = Dataset::from_labels(X, IntVector::Ones(1));
  const double gamma = 0.5, lam = 2 / (1 + gamma * gamma);
  Matrix W(2, 2);
  W << lam / std::sqrt(2.0), 0, -gamma * lam / std::sqrt(2.0), 0;
  const auto cert = extract_net_kkt(NetworkParams(W, gamma), ds, 1e-9);
  CHECK(cert.lambda(0) == doctest::Approx(1.6).epsilon(1e-12));
  CHECK(cert.stationarity_residual <= 1e-10);
  CHECK(cert.passes);
  CHECK(*cert.tau == doctest::Approx(1.0));
  const Vector z = effective_linear_direction(cert.lambda, ds, gamma);
  CHECK(z(0) == doctest::Approx(1.2));
  CHECK(z(1) == 0.0);
}

TEST_CASE("KKT extraction: gamma = 1 reproduces linear multipliers") {
  const Dataset ds = sample_sg(SgSpec::gaussian_spiked(200, 0.5, 0.1), 10, 8);
  const auto sol = solve_max_margin(ds);
  const int m = 6;
  Matrix W(m, 200);
  const double s = 1 / std::sqrt(static_cast<double>(m));
  for (int j = 0; j < m; ++j) W.row(j) = (j < m / 2 ? s : -s) * sol.w.transpose();
  const auto cert = extract_net_kkt(NetworkParams(W, 1.0), ds);
  CHECK((cert.lambda - sol.lambda).norm() <= 1e-8 * sol.lambda.norm());
  CHECK(cert.passes);
}

TEST_CASE("KKT extraction rejects a random unit-margin network") {
  std::mt19937_64 g(3);
  const Dataset ds = near_basis(6, 30, 0.01, 2);
  // Random W flipped neuron-wise until every margin is positive.
  NetworkParams net;
  for (int t = 0; t < 1000; ++t) {
    net = NetworkParams(randn(8, 30, g), 0.5);
    if (interpolation_check(Predictor{net}, ds).interpolates) break;
  }
  REQUIRE(interpolation_check(Predictor{net}, ds).interpolates);
  const auto cert = extract_net_kkt(net, ds);
  CHECK(cert.stationarity_residual > 0.1);
  CHECK(!cert.passes);
}

TEST_CASE("leaky bounds") {
  OrthogonalityProfile p;
  p.r_min_sq = p.r_max_sq = p.r_sq = 1.0;
  auto b = lambda_bounds_leaky(p, 1.0, 3.0);
  CHECK(b.lower == doctest::Approx(0.5));
  CHECK(b.upper == doctest::Approx(1.5));
  b = lambda_bounds_leaky(p, 0.5, 24.0);
  CHECK(b.lower == doctest::Approx(1 - 1.0 / 11));
  CHECK(b.upper == doctest::Approx(4.3636).epsilon(1e-4));
  CHECK_THROWS_AS(lambda_bounds_leaky(p, 0.5, 10.0), ValidationError);

  CHECK(tau_bound_leaky(1e12, 1, 1) == doctest::Approx(1.0));
  CHECK(tau_bound_leaky(24, 1, 0.5) == doctest::Approx(4.8));
  for (double pp : {3.0, 5.0, 100.0})
    for (double r : {1.0, 1.3, 2.0}) CHECK(tau_bound_leaky(pp, r, 1.0) == doctest::Approx(tau_bound_linear(pp, r)));
  CHECK_THROWS_AS(tau_bound_leaky(10, 1, 0.5), ValidationError);
}

TEST_CASE("effective direction") {
  const Dataset ds = sample_sg(SgSpec::gaussian_spiked(5, 0.5, 0.1), 4, 1);
  const Vector all = effective_linear_direction(Vector::Ones(4), ds, 1.0);
  CHECK((all - ds.X.transpose() * ds.y_obs.cast<double>()).norm() < 1e-12);
  CHECK(effective_linear_direction(Vector::Zero(4), ds, 0.5).norm() == 0.0);
}

TEST_CASE("boundary agreement") {
  std::mt19937_64 g(4);
  const Matrix W = randn(6, 10, g);
  const NetworkParams lin(W, 1.0);
  const Vector z = W.transpose() * lin.a();
  const auto same = boundary_agreement(lin, z, std::nullopt, 10000, 1);
  CHECK(same.fraction == 1.0);
  CHECK(same.compared + same.excluded == 10000);

  const NetworkParams rnd(randn(6, 10, g), 0.3);
  const Vector zr = randn(10, 1, g).col(0);
  CHECK(boundary_agreement(rnd, zr, std::nullopt, 10000, 1).fraction < 1.0);
  CHECK_THROWS_AS(boundary_agreement(rnd, Vector::Zero(10), std::nullopt, 10, 1), ValidationError);

  const DistributionSpec spec = SgSpec::gaussian_spiked(10, 0.5, 0.1);
  const auto viaspec = boundary_agreement(lin, z, spec, 2000, 2);
  CHECK(viaspec.fraction == 1.0);
}

TEST_CASE("certified network on strongly orthogonal data") {
  const double gamma = 0.5;
  const Dataset ds = near_basis(6, 400, 1e-4, 7);
  const auto prof = orthogonality_profile(ds);
  REQUIRE(prof.p_star_or_inf() >= 3 / (gamma * gamma * gamma));
  TrainConfig cfg;
  cfg.max_steps = 50000;
  cfg.min_steps = 20000;
  const auto res = train_to_margin(init_network(8, 400, gamma, 1e-6, 7), ds, cfg);
  const auto cert = extract_net_kkt(res.params, ds);
  CHECK(cert.stationarity_residual <= 1e-3);
  REQUIRE(cert.passes);
  const auto b = lambda_bounds_leaky(prof, gamma, *prof.p_star);
  CHECK(cert.lambda.minCoeff() >= b.lower);
  CHECK(cert.lambda.maxCoeff() <= b.upper);
  CHECK(*cert.tau <= tau_bound_leaky(*prof.p_star, prof.r_sq, gamma));
  const Vector z = effective_linear_direction(cert.lambda, ds, gamma);
  CHECK(boundary_agreement(cert.params, z, std::nullopt, 10000, 3, 1e-3).fraction == 1.0);
}
