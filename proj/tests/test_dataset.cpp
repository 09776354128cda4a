#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "kktlab/dataset.hpp"
#include "kktlab/dataset_io.hpp"
#include "kktlab/errors.hpp"

using namespace kktlab;

namespace {

// 99% normal-approximation band for a binomial proportion.
bool in_binomial_band(double frac, double p, double n) {
  return std::abs(frac - p) <= 2.5758 * std::sqrt(p * (1 - p) / n);
}

void check_xor(const Dataset& ds) {
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    CHECK((ds.y_obs(r) == -ds.y_clean(r)) == ds.noise_mask[i]);
  }
}

}  // namespace

TEST_CASE("sg sampler: no flips at eta = 0, labels are signs of x_1") {
  SgSpec s;
  s.lambda = Vector::Ones(5);
  s.eta = 0.0;
  const Dataset ds = sample_sg(s, 200, 1);
  CHECK(ds.noisy_count() == 0);
  CHECK(ds.y_obs == ds.y_clean);
  for (Eigen::Index i = 0; i < 200; ++i) CHECK(ds.y_clean(i) == (ds.X(i, 0) >= 0 ? 1 : -1));
  CHECK(!ds.cluster_id.has_value());
}

TEST_CASE("sg sampler: flip fraction at eta = 0.1") {
  const SgSpec s = SgSpec::gaussian_spiked(20, 0.75, 0.1);
  const Dataset ds = sample_sg(s, 10000, 2);
  check_xor(ds);
  CHECK(in_binomial_band(static_cast<double>(ds.noisy_count()) / 1e4, 0.1, 1e4));
}

TEST_CASE("gaussian_spiked is the P_gaus covariance") {
  const SgSpec s = SgSpec::gaussian_spiked(10000, 0.75, 0.1);
  CHECK(s.lambda(0) == doctest::Approx(1000.0));
  CHECK(s.lambda(1) == 1.0);
  CHECK(s.lambda(9999) == 1.0);
  const Dataset ds = sample_sg(SgSpec::gaussian_spiked(50, 0.75, 0.0), 20000, 3);
  const double var1 = ds.X.col(0).squaredNorm() / 20000.0;
  CHECK(var1 == doctest::Approx(std::pow(50.0, 0.75)).epsilon(0.05));
}

TEST_CASE("sampling is deterministic and paired across eta") {
  const SgSpec a = SgSpec::gaussian_spiked(30, 0.5, 0.1);
  SgSpec b = a;
  b.eta = 0.3;
  const Dataset d1 = sample_sg(a, 50, 9);
  const Dataset d2 = sample_sg(a, 50, 9);
  const Dataset d3 = sample_sg(b, 50, 9);
  CHECK(d1.X == d2.X);
  CHECK(d1.y_obs == d2.y_obs);
  CHECK(d1.X == d3.X);  // flips come from their own stream
  CHECK(d1.noisy_count() <= d3.noisy_count());
  const Dataset d4 = sample_sg(a, 50, 10);
  CHECK(d1.X != d4.X);
}

TEST_CASE("sample_rows agrees with any chunking") {
  ClustSpec c = ClustSpec::orthogonal(12, 3, 2.0, 0.2, (IntVector(3) << 1, -1, 1).finished());
  const DistributionSpec spec = c;
  const Dataset full = sample(spec, 40, 5);
  const Dataset part = sample_rows(spec, 5, 17, 9);
  CHECK(part.X == full.X.middleRows(17, 9));
  CHECK(part.y_obs == full.y_obs.segment(17, 9));
  for (int i = 0; i < 9; ++i) CHECK((*part.cluster_id)[i] == (*full.cluster_id)[17 + i]);
}

TEST_CASE("validation errors") {
  SgSpec s;
  s.lambda = (Vector(3) << 1.0, 2.0, 1.0).finished();
  s.eta = 0.1;
  CHECK_THROWS_AS(sample_sg(s, 10, 1), ValidationError);
  s.lambda = Vector::Ones(3);
  s.eta = 0.5;
  CHECK_THROWS_AS(sample_sg(s, 10, 1), ValidationError);
  s.eta = 0.1;
  CHECK_THROWS_AS(sample_sg(s, 0, 1), ValidationError);
  ClustSpec c;
  c.means = Matrix::Ones(1, 4);
  c.cluster_labels = IntVector::Ones(1);
  CHECK_THROWS_AS(sample_clust(c, 10, 1), ValidationError);
  CHECK_THROWS_AS(base_dist_from_string("cauchy"), ValidationError);
}

TEST_CASE("two opposing clusters behave like P_opp") {
  Vector mu = Vector::Zero(6);
  mu(0) = 1.5;
  ClustSpec c;
  c.means.resize(2, 6);
  c.means.row(0) = mu.transpose();
  c.means.row(1) = -mu.transpose();
  c.cluster_labels = (IntVector(2) << 1, -1).finished();
  c.eta = 0.0;
  const Dataset dc = sample_clust(c, 20000, 4);
  OppSpec o;
  o.mu = mu;
  o.eta = 0.0;
  const Dataset dopp = sample_opp(o, 20000, 4);
  // E[y x] = mu in both models.
  const Vector mc = dc.X.transpose() * dc.y_obs.cast<double>() / 20000.0;
  const Vector mo = dopp.X.transpose() * dopp.y_obs.cast<double>() / 20000.0;
  CHECK(mc(0) == doctest::Approx(1.5).epsilon(0.03));
  CHECK(mo(0) == doctest::Approx(1.5).epsilon(0.03));
  CHECK(std::abs(mc(1)) < 0.04);
  CHECK(std::abs(mo(1)) < 0.04);
}

TEST_CASE("clusters with zero noise sit on their means") {
  ClustSpec c = ClustSpec::orthogonal(5, 2, 3.0, 0.0, (IntVector(2) << 1, -1).finished());
  c.noise_scale = 0.0;
  const Dataset ds = sample_clust(c, 30, 2);
  for (int i = 0; i < 30; ++i) {
    const int q = (*ds.cluster_id)[i];
    CHECK(ds.X.row(i) == c.means.row(q));
    CHECK(ds.y_obs(i) == c.cluster_labels(q));
  }
}

TEST_CASE("cluster proportions with k = 4") {
  IntVector l(4);
  l << 1, -1, 1, -1;
  const ClustSpec c = ClustSpec::orthogonal(8, 4, 1.0, 0.1, l);
  const Dataset ds = sample_clust(c, 10000, 6);
  check_xor(ds);
  int counts[4] = {0, 0, 0, 0};
  for (int q : *ds.cluster_id) {
    REQUIRE(q >= 0);
    REQUIRE(q < 4);
    ++counts[q];
  }
  // Bonferroni over the 4 cells keeps the joint level at 99%.
  for (int q = 0; q < 4; ++q) CHECK(std::abs(counts[q] / 1e4 - 0.25) <= 2.807 * std::sqrt(0.25 * 0.75 / 1e4));
}

TEST_CASE("opp sampler examples") {
  OppSpec o;
  o.mu = Vector::Zero(10);
  o.eta = 0.2;
  const Dataset z = sample_opp(o, 10000, 1);
  check_xor(z);
  CHECK(in_binomial_band(static_cast<double>(z.noisy_count()) / 1e4, 0.2, 1e4));
  // mu = 0: label independent of x
  const double corr = (z.X.col(0).array() * z.y_clean.cast<double>().array()).mean();
  CHECK(std::abs(corr) < 0.05);

  o.mu(0) = 50.0;
  o.eta = 0.0;
  const Dataset s = sample_opp(o, 1000, 2);
  int err = 0;
  for (int i = 0; i < 1000; ++i) err += (s.X.row(i).dot(o.mu) >= 0 ? 1 : -1) != s.y_obs(i);
  CHECK(err == 0);
}

TEST_CASE("isotropic factor moments") {
  SgSpec s;
  s.lambda = Vector::Ones(1000);
  s.eta = 0.0;
  const Dataset ds = sample_sg(s, 10000, 8);
  const double mean_sq = ds.X.rowwise().squaredNorm().mean();
  CHECK(std::abs(mean_sq - 1000.0) <= 10.0);

  SgSpec t;
  t.lambda = Vector::Ones(4);
  t.eta = 0.0;
  const Dataset big = sample_sg(t, 100000, 8);
  Vector v(4);
  v << 0.5, -0.5, 0.5, 0.5;
  const double m = (big.X * v).mean();
  CHECK(std::abs(m) <= 5.0 / std::sqrt(1e5));

  for (BaseDist b : {BaseDist::kRademacher, BaseDist::kUniformScaled}) {
    SgSpec r;
    r.lambda = Vector::Ones(1000);
    r.base_dist = b;
    const Dataset dr = sample_sg(r, 2000, 3);
    CHECK(std::abs(dr.X.rowwise().squaredNorm().mean() - 1000.0) <= 10.0);
  }
}

TEST_CASE("dataset files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "kktlab_io_test";
  std::filesystem::create_directories(dir);
  IntVector l(3);
  l << 1, -1, 1;
  const Dataset ds = sample_clust(ClustSpec::orthogonal(7, 3, 2.5, 0.2, l), 25, 77);
  const auto bin = (dir / "c.kkd").string();
  write_dataset_binary(ds, bin);
  const Dataset back = read_dataset(bin);
  CHECK(back.X == ds.X);
  CHECK(back.y_clean == ds.y_clean);
  CHECK(back.y_obs == ds.y_obs);
  CHECK(back.noise_mask == ds.noise_mask);
  CHECK(*back.cluster_id == *ds.cluster_id);
  CHECK(back.seed == 77);
  REQUIRE(back.spec);
  CHECK(std::get<ClustSpec>(*back.spec).means == std::get<ClustSpec>(*ds.spec).means);

  const auto csv = (dir / "c.csv").string();
  write_dataset_csv(ds, csv);
  const Dataset fromcsv = read_dataset(csv);
  CHECK(fromcsv.X == ds.X);  // 17 significant digits round-trip doubles
  CHECK(fromcsv.y_obs == ds.y_obs);

  const Dataset sg = sample_sg(SgSpec::gaussian_spiked(4, 0.5, 0.1), 5, 1);
  write_dataset_csv(sg, csv);
  const Dataset sgb = read_dataset(csv);
  CHECK(!sgb.cluster_id.has_value());
  CHECK(sgb.X == sg.X);
  std::filesystem::remove_all(dir);
}

TEST_CASE("hand-built datasets") {
  Matrix X(2, 2);
  X << 1, 0, 0, 1;
  const Dataset ds = Dataset::from_labels(X, (IntVector(2) << 1, -1).finished());
  CHECK(ds.noisy_count() == 0);
  Matrix bad = X;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(Dataset::from_labels(bad, (IntVector(2) << 1, -1).finished()), ValidationError);
  CHECK_THROWS_AS(Dataset::from_labels(X, (IntVector(2) << 1, 0).finished()), ValidationError);
}
