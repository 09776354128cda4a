#include <doctest.h>

#include <cmath>
#include <random>

#include "kktlab/dataset.hpp"
#include "kktlab/eval.hpp"
#include "kktlab/linear_maxmargin.hpp"

using namespace kktlab;

TEST_CASE("interpolation check") {
  Matrix X(1, 3);
  X << 1, -2, 0.5;
  const Dataset one = Dataset::from_labels(X, (IntVector(1) << -1).finished());
  const Vector w = -X.row(0).transpose();
  CHECK(interpolation_check(Predictor{w}, one).interpolates);

  const Dataset ds = sample_sg(SgSpec::gaussian_spiked(300, 0.5, 0.2), 20, 3);
  const auto sol = solve_max_margin(ds);
  const auto ok = interpolation_check(Predictor{sol.w}, ds);
  CHECK(ok.interpolates);
  CHECK(ok.margins.minCoeff() == doctest::Approx(1.0).epsilon(1e-6));
  const auto flipped = interpolation_check(Predictor{Vector(-sol.w)}, ds);
  CHECK(!flipped.interpolates);
  CHECK(flipped.train_errors == 20);
}

TEST_CASE("wilson interval") {
  const auto e = wilson_interval(0, 100, 0.95);
  CHECK(e.point_estimate == 0.0);
  CHECK(e.ci_low == 0.0);
  CHECK(e.ci_high == doctest::Approx(0.036993).epsilon(1e-4));
  const auto h = wilson_interval(50, 100, 0.95);
  CHECK(h.ci_low == doctest::Approx(0.403832).epsilon(1e-4));
  CHECK(h.ci_high == doctest::Approx(0.596168).epsilon(1e-4));
  const auto all = wilson_interval(7, 7, 0.99);
  CHECK(all.ci_high == doctest::Approx(1.0));
  CHECK(all.ci_low < 1.0);
  CHECK_THROWS_AS(wilson_interval(1, 0, 0.9), ValidationError);
  CHECK_THROWS_AS(wilson_interval(3, 2, 0.9), ValidationError);
}

TEST_CASE("closed-form Gaussian oracle") {
  const SgSpec spec = SgSpec::gaussian_spiked(5, 0.5, 0.1);
  Vector w = Vector::Zero(5);
  w(0) = 1;
  CHECK(test_error_exact_sg_gaussian(w, spec).point_estimate == doctest::Approx(0.1));
  CHECK(test_error_exact_sg_gaussian(w, spec).method == ErrorMethod::kClosedForm);
  w << 0, 1, 0, 0, 0;
  CHECK(test_error_exact_sg_gaussian(w, spec).point_estimate == doctest::Approx(0.5));

  SgSpec iso;
  iso.lambda = Vector::Ones(4);
  iso.eta = 0.2;
  Vector w2 = Vector::Zero(4);
  w2(0) = w2(1) = 1;
  CHECK(test_error_exact_sg_gaussian(w2, iso).point_estimate == doctest::Approx(0.2 + 0.6 / 4));

  std::mt19937_64 g(5);
  std::normal_distribution<double> z;
  for (int t = 0; t < 20; ++t) {
    Vector v(5);
    for (auto& x : v) x = z(g);
    const double e = test_error_exact_sg_gaussian(v, spec).point_estimate;
    CHECK(e >= 0.1);
    CHECK(test_error_exact_sg_gaussian(-v, spec).point_estimate == doctest::Approx(1 - e).epsilon(1e-12));
  }

  SgSpec rad = iso;
  rad.base_dist = BaseDist::kRademacher;
  CHECK_THROWS_AS(test_error_exact_sg_gaussian(w2, rad), ValidationError);
  CHECK_THROWS_AS(test_error_exact_sg_gaussian(Vector::Zero(4), iso), ValidationError);
}

TEST_CASE("Monte Carlo estimates") {
  const SgSpec spec = SgSpec::gaussian_spiked(20, 0.5, 0.1);
  Vector e1 = Vector::Zero(20);
  e1(0) = 1;
  const auto est = test_error_mc(Predictor{e1}, spec, 100000, 1);
  CHECK(est.ci_low <= 0.1);
  CHECK(est.ci_high >= 0.1);
  CHECK(est.n_samples == 100000);
  CHECK(est.ci_low <= est.point_estimate);
  CHECK(est.point_estimate <= est.ci_high);

  Vector perp = Vector::Zero(20);
  perp(3) = 1;
  const auto half = test_error_mc(Predictor{perp}, spec, 100000, 1);
  CHECK(half.ci_low <= 0.5);
  CHECK(half.ci_high >= 0.5);

  // Constant predictor on P_opp: any fixed sign errs half the time.
  OppSpec opp;
  opp.mu = Vector::Zero(10);
  opp.mu(0) = 3;
  opp.eta = 0.3;
  const auto c = test_error_mc(Predictor{Vector(Vector::Zero(10))}, opp, 20000, 2);
  CHECK(c.ci_low <= 0.5);
  CHECK(c.ci_high >= 0.5);

  // Independent of worker count; shared draws give complementary errors.
  const auto w1 = test_error_mc(Predictor{perp}, spec, 5000, 9, 0.99, 1);
  const auto w3 = test_error_mc(Predictor{perp}, spec, 5000, 9, 0.99, 3);
  CHECK(w1.point_estimate == w3.point_estimate);
  Vector v = Vector::Ones(20);
  const auto both = test_errors_mc({Predictor{v}, Predictor{Vector(-v)}}, spec, 5000, 4);
  CHECK(both[0].point_estimate + both[1].point_estimate == doctest::Approx(1.0));
}

TEST_CASE("Monte Carlo agrees with the closed form") {
  std::mt19937_64 g(77);
  std::normal_distribution<double> z;
  int inside = 0;
  for (int t = 0; t < 50; ++t) {
    SgSpec spec;
    spec.lambda = Vector(6);
    spec.lambda << 4, 2, 1, 1, 0.5, 0.25;
    spec.eta = 0.05 * (t % 5);
    Vector w(6);
    for (auto& x : w) x = z(g);
    const double exact = test_error_exact_sg_gaussian(w, spec).point_estimate;
    const auto mc = test_error_mc(Predictor{w}, spec, 20000, 1000 + t);
    if (mc.ci_low <= exact && exact <= mc.ci_high) ++inside;
  }
  CHECK(inside >= 48);
}

TEST_CASE("opp signal decomposition") {
  OppSpec spec;
  spec.mu = Vector::Zero(300);
  spec.mu(0) = 4;
  const Dataset clean = sample_opp(spec, 12, 1);
  const auto dec = opp_signal_decomposition(clean, Vector::Ones(12), 1, 1);
  CHECK(dec.label_balance == 12.0);
  CHECK(dec.signal_norm == doctest::Approx(48.0));
  Vector resid = Vector::Zero(300);
  for (int i = 0; i < 12; ++i) resid += clean.y_obs(i) * (clean.X.row(i).transpose() - clean.y_clean(i) * spec.mu);
  CHECK((dec.residual - resid).norm() <= 1e-10 * resid.norm());
  CHECK((dec.xi - resid / 12.0).norm() <= 1e-12 * resid.norm());

  OppSpec zero = spec;
  zero.mu.setZero();
  CHECK(opp_signal_decomposition(sample_opp(zero, 12, 1), Vector::Ones(12)).signal_norm == 0.0);

  const Dataset sg = sample_sg(SgSpec::gaussian_spiked(10, 0.5, 0.1), 5, 1);
  CHECK_THROWS_AS(opp_signal_decomposition(sg, Vector::Ones(5)), ValidationError);

  // Training influence: min_k <xi, y_k x_k> >= d / (4n) in all 20 seeds.
  OppSpec big;
  big.mu = Vector::Zero(4000);
  big.mu(0) = 5;
  big.eta = 0.2;
  int ok = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dataset ds = sample_opp(big, 20, s);
    try {
      const auto r = opp_signal_decomposition(ds, Vector::Ones(20), 1, s);
      if (r.train_min >= 4000.0 / (4 * 20)) ++ok;
    } catch (const DegenerateError&) {
    }
  }
  CHECK(ok == 20);
}
