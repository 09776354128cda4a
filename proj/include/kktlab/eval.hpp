#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "kktlab/dataset.hpp"
#include "kktlab/leaky_net.hpp"
#include "kktlab/types.hpp"

namespace kktlab {

/// Either a linear direction w (predicts sign <w, x>) or a network.
using Predictor = std::variant<Vector, NetworkParams>;

std::size_t predictor_dim(const Predictor& p);
/// Raw scores; the predicted label is sign_of(score).
Vector predictor_scores(const Predictor& p, const Matrix& X);

struct InterpolationResult {
  bool interpolates = false;
  Vector margins;  // y_obs_i * score_i
  std::size_t train_errors = 0;
};

InterpolationResult interpolation_check(const Predictor& p, const Dataset& data);

enum class ErrorMethod { kMonteCarlo, kClosedForm, kEmpiricalTrain };
std::string to_string(ErrorMethod m);

struct ErrorEstimate {
  double point_estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_samples = 0;
  ErrorMethod method = ErrorMethod::kMonteCarlo;
};

/// Wilson score interval for k successes out of N.
ErrorEstimate wilson_interval(std::size_t k, std::size_t N, double level);

/// N fresh draws with observed (possibly flipped) labels. Draws are addressed
/// by row, so the result does not depend on `workers`.
ErrorEstimate test_error_mc(const Predictor& p, const DistributionSpec& spec, std::size_t N,
                            std::uint64_t seed, double ci_level = 0.99, unsigned workers = 1);

/// Several predictors scored on the same draws (one pass over the samples).
std::vector<ErrorEstimate> test_errors_mc(const std::vector<Predictor>& ps,
                                          const DistributionSpec& spec, std::size_t N,
                                          std::uint64_t seed, double ci_level = 0.99,
                                          unsigned workers = 1);

/// eta + (1 - 2 eta) acos(rho) / pi, rho = sqrt(lambda_1) w_1 / sqrt(w^T Sigma w).
ErrorEstimate test_error_exact_sg_gaussian(const Vector& w, const SgSpec& spec);

struct OppDecomposition {
  double label_balance = 0.0;  // sum_i s_i y_i y~_i, i.e. |C| - |N| for uniform s
  double signal_norm = 0.0;    // ||label_balance * mu||
  Vector residual;             // sum_i s_i y_i z_i
  Vector xi;                   // residual / label_balance
  double train_min = 0.0;      // min_k <xi, y_k x_k>
  double test_max = 0.0;       // max over fresh draws |<y x, xi>|
  std::size_t test_draws = 0;
  double d_over_n = 0.0;
  double test_scale = 0.0;     // (||mu|| + sqrt d) / sqrt n
  double train_ratio = 0.0;    // train_min / (d / n)
  double test_ratio = 0.0;     // test_max / test_scale
};

/// sum_i s_i y_i x_i = label_balance * mu + residual. Fresh test draws use
/// the dataset's spec with a derived seed.
OppDecomposition opp_signal_decomposition(const Dataset& data, const Vector& s,
                                          std::size_t test_draws = 1, std::uint64_t seed = 0);

}  // namespace kktlab
