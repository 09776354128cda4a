#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kktlab/dataset.hpp"
#include "kktlab/errors.hpp"
#include "kktlab/geometry.hpp"
#include "kktlab/linear_maxmargin.hpp"
#include "kktlab/types.hpp"

namespace kktlab {

/// f(x; W) = sum_j a_j phi(<w_j, x>), phi(q) = max(gamma q, q). The second
/// layer is fixed at construction: the first m/2 entries are +1/sqrt(m), the
/// rest -1/sqrt(m).
class NetworkParams {
 public:
  NetworkParams() = default;
  NetworkParams(Matrix W, double gamma);

  const Matrix& W() const { return W_; }
  const Vector& a() const { return a_; }
  double gamma() const { return gamma_; }
  std::size_t m() const { return static_cast<std::size_t>(W_.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(W_.cols()); }

  /// Same a and gamma, new first layer.
  NetworkParams with_weights(Matrix W) const;

 private:
  Matrix W_;
  Vector a_;
  double gamma_ = 0.5;
};

NetworkParams init_network(std::size_t m, std::size_t d, double gamma, double scale,
                           std::uint64_t seed);

double forward(const NetworkParams& params, const Vector& x);
/// f at every row of X.
Vector forward_batch(const NetworkParams& params, const Matrix& X);

enum class Loss { kLogistic, kExponential };
std::string to_string(Loss l);
Loss loss_from_string(const std::string& s);

struct LossGrad {
  double loss = 0.0;      // may underflow to 0 late in training
  double log_loss = 0.0;  // always finite for finite margins
  Matrix grad;            // m x d
};

/// Empirical risk with observed labels and its Clarke-selection gradient
/// (phi'(0) = gamma).
LossGrad loss_and_grad(const NetworkParams& params, const Dataset& data, Loss loss);

struct TrainConfig {
  Loss loss = Loss::kExponential;
  double base_lr = 0.0;  // 0 selects 0.5 / max_i ||x_i||^2
  std::size_t max_steps = 200000;
  std::size_t min_steps = 0;
  std::size_t checkpoint_every = 100;
  double dir_tol = 1e-6;
  double margin_tol = 1e-6;      // relative change of the normalized margin
  std::size_t margin_window = 5;  // checkpoints
  double log_loss_floor = -std::numeric_limits<double>::infinity();
  std::size_t max_backtracks = 40;

  void validate() const;
};

struct TracePoint {
  std::size_t step = 0;
  double loss = 0.0;
  double log_loss = 0.0;
  double min_normalized_margin = 0.0;
  double cosine = 0.0;  // vs previous checkpoint; 0 at the first one
  double w_norm = 0.0;
};

struct TrainTrace {
  std::vector<TracePoint> points;
  std::string stop_reason;
  std::size_t steps = 0;
  std::size_t backtracks = 0;
};

struct TrainResult {
  NetworkParams params;
  TrainTrace trace;
};

class TrainingFailureWithTrace : public TrainingFailure {
 public:
  TrainingFailureWithTrace(const std::string& what, TrainTrace trace, NetworkParams last)
      : TrainingFailure(what), trace_(std::move(trace)), last_(std::move(last)) {}
  const TrainTrace& trace() const { return trace_; }
  const NetworkParams& last() const { return last_; }

 private:
  TrainTrace trace_;
  NetworkParams last_;
};

/// Normalized gradient descent (step base_lr / max(L, floor)) with a
/// backtracking guard that keeps the risk monotone.
TrainResult train_to_margin(const NetworkParams& params, const Dataset& data,
                            const TrainConfig& cfg);

/// W / min_i y_i f(x_i; W).
NetworkParams rescale_to_unit_margin(const NetworkParams& params, const Dataset& data);

struct CertifyOptions {
  double tol_kink = 1e-6;  // relative: |<w_j,x_i>| <= tol ||w_j|| ||x_i||
  double tol_stationarity = 1e-3;
  double tol_comp_slack = 1e-3;  // relative to max lambda
  double tol_feasibility = 1e-9;
};

struct KktCertificate {
  Vector lambda;
  double stationarity_residual = 0.0;  // ||W - sum lambda_i psi_i||_F / ||W||_F
  double feasibility_min = 0.0;        // min_i y_i f(x_i) - 1
  double comp_slack_max = 0.0;         // max_i lambda_i |y_i f(x_i) - 1|
  std::optional<double> tau;           // needs all lambda_i > 0
  std::size_t kink_count = 0;
  double min_abs_preactivation_ratio = 0.0;  // min |<w_j,x_i>| / (||w_j|| ||x_i||)
  bool nnls_converged = false;
  bool passes = false;
  NetworkParams params;  // the unit-margin parameters that were certified
};

/// Rescales to unit margin first, then recovers multipliers by NNLS on the
/// stacked stationarity equations (solved in n x n Gram form).
KktCertificate extract_net_kkt(const NetworkParams& params, const Dataset& data,
                               const CertifyOptions& opts = {});
KktCertificate extract_net_kkt(const NetworkParams& params, const Dataset& data,
                               double tol_kink);

LambdaBounds lambda_bounds_leaky(const OrthogonalityProfile& profile, double gamma, double p);
double tau_bound_leaky(double p, double r_sq, double gamma);

/// ((1 + gamma) / 2) sum_i lambda_i y_i x_i
Vector effective_linear_direction(const Vector& lambda, const Dataset& data, double gamma);

struct AgreementResult {
  double fraction = 0.0;
  std::size_t compared = 0;
  std::size_t excluded = 0;
};

/// Probes come from `probe_spec` if given, else isotropic N(0, I_d). Probes
/// with |<z,x>| < band ||z|| ||x|| are excluded.
AgreementResult boundary_agreement(const NetworkParams& params, const Vector& z,
                                   const std::optional<DistributionSpec>& probe_spec,
                                   std::size_t N, std::uint64_t seed, double band = 1e-3);

}  // namespace kktlab
