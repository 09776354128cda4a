#include "kktlab/dataset.hpp"

#include <cmath>
#include <span>

#include "kktlab/errors.hpp"
#include "kktlab/rng.hpp"

namespace kktlab {

namespace {

void check_eta(double eta) {
  require(std::isfinite(eta) && eta >= 0.0 && eta < 0.5, "eta must lie in [0, 1/2)");
}

void fill_isotropic(BaseDist base, const RowStream& rs, std::uint64_t row, std::span<double> out) {
  switch (base) {
    case BaseDist::kGaussian:
      rs.normals(row, out);
      break;
    case BaseDist::kRademacher:
      rs.signs(row, out);
      break;
    case BaseDist::kUniformScaled: {
      const double h = std::sqrt(3.0);
      rs.uniforms(row, -h, h, out);
      break;
    }
  }
}

// Flip decisions live on their own stream: one uniform per row.
void apply_flips(Dataset& ds, double eta, std::uint64_t seed, std::size_t first) {
  const RowStream flips(seed, Stream::kFlips);
  const auto n = ds.n();
  ds.noise_mask.assign(n, false);
  ds.y_obs = ds.y_clean;
  for (std::size_t i = 0; i < n; ++i) {
    if (flips.uniform(first + i, 0) < eta) {
      ds.noise_mask[i] = true;
      ds.y_obs(static_cast<Eigen::Index>(i)) = -ds.y_clean(static_cast<Eigen::Index>(i));
    }
  }
}

Dataset rows_sg(const SgSpec& spec, std::uint64_t seed, std::size_t first, std::size_t count) {
  const auto d = spec.dim();
  const Vector scale = spec.lambda.cwiseSqrt();
  const RowStream cov(seed, Stream::kCovariates);
  Dataset ds;
  ds.X.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(d));
  ds.y_clean.resize(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    auto row = ds.X.row(static_cast<Eigen::Index>(i));
    fill_isotropic(spec.base_dist, cov, first + i, std::span<double>(row.data(), d));
    row.array() *= scale.transpose().array();
    ds.y_clean(static_cast<Eigen::Index>(i)) = sign_of(row(0));
  }
  apply_flips(ds, spec.eta, seed, first);
  return ds;
}

Dataset rows_clust(const ClustSpec& spec, std::uint64_t seed, std::size_t first, std::size_t count) {
  const auto d = spec.dim();
  const auto k = spec.k();
  const RowStream cov(seed, Stream::kCovariates);
  const RowStream clusters(seed, Stream::kClusters);
  Dataset ds;
  ds.X.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(d));
  ds.y_clean.resize(static_cast<Eigen::Index>(count));
  std::vector<int> ids(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto q = std::min(k - 1, static_cast<std::size_t>(clusters.uniform(first + i, 0) *
                                                            static_cast<double>(k)));
    ids[i] = static_cast<int>(q);
    auto row = ds.X.row(static_cast<Eigen::Index>(i));
    if (spec.noise_scale > 0.0) {
      fill_isotropic(spec.base_dist, cov, first + i, std::span<double>(row.data(), d));
      row *= spec.noise_scale;
    } else {
      row.setZero();
    }
    row += spec.means.row(static_cast<Eigen::Index>(q));
    ds.y_clean(static_cast<Eigen::Index>(i)) = spec.cluster_labels(static_cast<Eigen::Index>(q));
  }
  ds.cluster_id = std::move(ids);
  apply_flips(ds, spec.eta, seed, first);
  return ds;
}

Dataset rows_opp(const OppSpec& spec, std::uint64_t seed, std::size_t first, std::size_t count) {
  const auto d = spec.dim();
  const RowStream cov(seed, Stream::kCovariates);
  const RowStream labels(seed, Stream::kCleanLabels);
  Dataset ds;
  ds.X.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(d));
  ds.y_clean.resize(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const int yt = labels.uniform(first + i, 0) < 0.5 ? 1 : -1;
    auto row = ds.X.row(static_cast<Eigen::Index>(i));
    cov.normals(first + i, std::span<double>(row.data(), d));
    row += static_cast<double>(yt) * spec.mu.transpose();
    ds.y_clean(static_cast<Eigen::Index>(i)) = yt;
  }
  apply_flips(ds, spec.eta, seed, first);
  return ds;
}

}  // namespace

std::string to_string(BaseDist b) {
  switch (b) {
    case BaseDist::kGaussian:
      return "gaussian";
    case BaseDist::kRademacher:
      return "rademacher";
    case BaseDist::kUniformScaled:
      return "uniform_scaled";
  }
  return "gaussian";
}

BaseDist base_dist_from_string(const std::string& s) {
  if (s == "gaussian") return BaseDist::kGaussian;
  if (s == "rademacher") return BaseDist::kRademacher;
  if (s == "uniform_scaled") return BaseDist::kUniformScaled;
  throw ValidationError("unknown base distribution '" + s + "'");
}

SgSpec SgSpec::gaussian_spiked(std::size_t d, double rho, double eta) {
  require(d >= 1, "dimension must be positive");
  SgSpec s;
  s.lambda = Vector::Ones(static_cast<Eigen::Index>(d));
  s.lambda(0) = std::pow(static_cast<double>(d), rho);
  s.eta = eta;
  s.validate();
  return s;
}

void SgSpec::validate() const {
  require(lambda.size() >= 1, "SgSpec: lambda must be nonempty");
  require(lambda.allFinite(), "SgSpec: lambda must be finite");
  require(lambda(0) > 0.0, "SgSpec: lambda_1 must be positive");
  for (Eigen::Index j = 0; j < lambda.size(); ++j) {
    require(lambda(j) >= 0.0, "SgSpec: eigenvalues must be nonnegative");
    if (j > 0) require(lambda(j) <= lambda(j - 1), "SgSpec: eigenvalues must be nonincreasing");
  }
  check_eta(eta);
}

ClustSpec ClustSpec::orthogonal(std::size_t d, std::size_t k, double norm, double eta,
                                IntVector labels) {
  require(k <= d, "orthogonal means need k <= d");
  ClustSpec s;
  s.means = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  for (std::size_t q = 0; q < k; ++q) s.means(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q)) = norm;
  s.cluster_labels = std::move(labels);
  s.eta = eta;
  s.validate();
  return s;
}

void ClustSpec::validate() const {
  require(means.rows() >= 2, "ClustSpec: need k >= 2 clusters");
  require(means.cols() >= 1, "ClustSpec: dimension must be positive");
  require(means.allFinite(), "ClustSpec: means must be finite");
  require(cluster_labels.size() == means.rows(), "ClustSpec: one label per cluster");
  for (Eigen::Index q = 0; q < cluster_labels.size(); ++q) {
    require(cluster_labels(q) == 1 || cluster_labels(q) == -1, "ClustSpec: labels must be +-1");
  }
  require(std::isfinite(noise_scale) && noise_scale >= 0.0, "ClustSpec: noise_scale must be >= 0");
  check_eta(eta);
}

void OppSpec::validate() const {
  require(mu.size() >= 1, "OppSpec: dimension must be positive");
  require(mu.allFinite(), "OppSpec: mu must be finite");
  check_eta(eta);
}

std::size_t spec_dim(const DistributionSpec& spec) {
  return std::visit([](const auto& s) { return s.dim(); }, spec);
}

double spec_eta(const DistributionSpec& spec) {
  return std::visit([](const auto& s) { return s.eta; }, spec);
}

void validate_spec(const DistributionSpec& spec) {
  std::visit([](const auto& s) { s.validate(); }, spec);
}

Dataset Dataset::from_labels(Matrix X, IntVector y) {
  Dataset ds;
  ds.X = std::move(X);
  ds.y_clean = y;
  ds.y_obs = std::move(y);
  ds.noise_mask.assign(ds.n(), false);
  ds.validate();
  return ds;
}

void Dataset::validate() const {
  const auto rows = X.rows();
  require(rows >= 1 && X.cols() >= 1, "dataset must have n >= 1 and d >= 1");
  require(X.allFinite(), "dataset has non-finite covariates");
  require(y_clean.size() == rows && y_obs.size() == rows &&
              noise_mask.size() == static_cast<std::size_t>(rows),
          "label vectors must have length n");
  for (Eigen::Index i = 0; i < rows; ++i) {
    require(y_clean(i) == 1 || y_clean(i) == -1, "clean labels must be +-1");
    require(y_obs(i) == 1 || y_obs(i) == -1, "observed labels must be +-1");
    require((y_obs(i) != y_clean(i)) == noise_mask[static_cast<std::size_t>(i)],
            "noise mask inconsistent with labels");
  }
  const bool is_cluster = spec && std::holds_alternative<ClustSpec>(*spec);
  if (spec) require(cluster_id.has_value() == is_cluster, "cluster_id present iff cluster spec");
  if (cluster_id) require(cluster_id->size() == static_cast<std::size_t>(rows), "cluster_id length");
}

std::size_t Dataset::noisy_count() const {
  std::size_t c = 0;
  for (bool b : noise_mask) c += b ? 1 : 0;
  return c;
}

Dataset sample_rows(const DistributionSpec& spec, std::uint64_t seed, std::size_t first,
                    std::size_t count) {
  validate_spec(spec);
  require(count >= 1, "sample size must be >= 1");
  Dataset ds = std::visit(
      [&](const auto& s) -> Dataset {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SgSpec>) return rows_sg(s, seed, first, count);
        else if constexpr (std::is_same_v<T, ClustSpec>) return rows_clust(s, seed, first, count);
        else return rows_opp(s, seed, first, count);
      },
      spec);
  ds.spec = std::make_shared<const DistributionSpec>(spec);
  ds.seed = seed;
  return ds;
}

Dataset sample(const DistributionSpec& spec, std::size_t n, std::uint64_t seed) {
  return sample_rows(spec, seed, 0, n);
}

Dataset sample_sg(const SgSpec& spec, std::size_t n, std::uint64_t seed) {
  return sample(DistributionSpec{spec}, n, seed);
}

Dataset sample_clust(const ClustSpec& spec, std::size_t n, std::uint64_t seed) {
  return sample(DistributionSpec{spec}, n, seed);
}

Dataset sample_opp(const OppSpec& spec, std::size_t n, std::uint64_t seed) {
  return sample(DistributionSpec{spec}, n, seed);
}

}  // namespace kktlab
