#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kktlab/types.hpp"

namespace kktlab {

/// Isotropic factor z; every option has independent, unit-variance,
/// sub-Gaussian components.
enum class BaseDist { kGaussian, kRademacher, kUniformScaled };

std::string to_string(BaseDist b);
BaseDist base_dist_from_string(const std::string& s);

/// Sub-Gaussian marginals with diagonal covariance. Clean label is the sign of
/// the first coordinate.
///
/// `beta` is the anti-concentration constant P(|z_1| <= t) <= beta t. It is
/// recorded for reports only; for the Gaussian base it is sqrt(2/pi).
struct SgSpec {
  Vector lambda;  // eigenvalues, nonincreasing, lambda(0) > 0
  BaseDist base_dist = BaseDist::kGaussian;
  double eta = 0.0;
  double beta = 0.7978845608028654;

  /// Sigma = diag(d^rho, 1, ..., 1) with a Gaussian base.
  static SgSpec gaussian_spiked(std::size_t d, double rho, double eta);
  void validate() const;
  std::size_t dim() const { return static_cast<std::size_t>(lambda.size()); }
};

/// k clusters x = mu_q + noise_scale * z with cluster-level clean labels.
struct ClustSpec {
  Matrix means;          // k x d, one mean per row
  IntVector cluster_labels;  // k entries in {-1, +1}
  double eta = 0.0;
  BaseDist base_dist = BaseDist::kGaussian;
  double noise_scale = 1.0;

  /// k means of norm `norm` along the first k coordinate axes.
  static ClustSpec orthogonal(std::size_t d, std::size_t k, double norm, double eta,
                              IntVector labels);
  void validate() const;
  std::size_t dim() const { return static_cast<std::size_t>(means.cols()); }
  std::size_t k() const { return static_cast<std::size_t>(means.rows()); }
};

/// Two opposing Gaussian clusters: y~ uniform, x = y~ mu + z, z ~ N(0, I).
struct OppSpec {
  Vector mu;
  double eta = 0.0;

  void validate() const;
  std::size_t dim() const { return static_cast<std::size_t>(mu.size()); }
};

using DistributionSpec = std::variant<SgSpec, ClustSpec, OppSpec>;

std::size_t spec_dim(const DistributionSpec& spec);
double spec_eta(const DistributionSpec& spec);
void validate_spec(const DistributionSpec& spec);

/// n labelled examples with clean/noisy bookkeeping. Immutable by convention
/// once produced by a sampler; safe to share across threads.
struct Dataset {
  Matrix X;                                 // n x d
  IntVector y_clean;                        // +-1
  IntVector y_obs;                          // +-1
  std::vector<bool> noise_mask;             // y_obs != y_clean
  std::optional<std::vector<int>> cluster_id;  // in [0, k), cluster specs only
  std::shared_ptr<const DistributionSpec> spec;  // null for hand-built data
  std::uint64_t seed = 0;

  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(X.cols()); }

  /// Hand-built dataset with no label noise.
  static Dataset from_labels(Matrix X, IntVector y);

  /// Checks every structural invariant; throws ValidationError.
  void validate() const;
  std::size_t noisy_count() const;
};

Dataset sample_sg(const SgSpec& spec, std::size_t n, std::uint64_t seed);
Dataset sample_clust(const ClustSpec& spec, std::size_t n, std::uint64_t seed);
Dataset sample_opp(const OppSpec& spec, std::size_t n, std::uint64_t seed);
Dataset sample(const DistributionSpec& spec, std::size_t n, std::uint64_t seed);

/// Rows [first, first + count) of sample(spec, N, seed) for any N >= first +
/// count. Used for chunked Monte Carlo without materialising N x d.
Dataset sample_rows(const DistributionSpec& spec, std::uint64_t seed, std::size_t first,
                    std::size_t count);

}  // namespace kktlab
