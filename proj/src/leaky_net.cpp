#include "kktlab/leaky_net.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "kktlab/nnls.hpp"
#include "kktlab/rng.hpp"

namespace kktlab {

namespace {

constexpr double kLog2 = 0.69314718055994530942;

void check_gamma(double gamma) {
  require(std::isfinite(gamma) && gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
}

double log_sum_exp(const Vector& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

// log l(q) and log |l'(q)|.
double log_loss_value(Loss loss, double q) {
  if (loss == Loss::kExponential) return -q;
  // log(log1p(exp(-q)))
  if (q > 30.0) return -q + std::log1p(-0.5 * std::exp(-q));
  if (q < -30.0) return std::log(-q + std::log1p(std::exp(q)));
  return std::log(std::log1p(std::exp(-q)));
}

double log_loss_slope(Loss loss, double q) {
  if (loss == Loss::kExponential) return -q;
  // log sigmoid(-q) = -softplus(q)
  return q > 0.0 ? -q - std::log1p(std::exp(-q)) : -std::log1p(std::exp(q));
}

struct RiskState {
  double log_risk = 0.0;  // log of the empirical risk
  Vector log_slope;       // log |l'(q_i)|
};

RiskState risk(Loss loss, const Vector& q) {
  const auto n = q.size();
  Vector ll(n);
  RiskState s;
  s.log_slope.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ll(i) = log_loss_value(loss, q(i));
    s.log_slope(i) = log_loss_slope(loss, q(i));
  }
  s.log_risk = log_sum_exp(ll) - std::log(static_cast<double>(n));
  return s;
}

// Preactivations P (m x n) -> y_i f(x_i).
Vector signed_outputs(const Matrix& P, const Vector& a, double gamma, const Vector& y) {
  const Matrix phi = P.unaryExpr([gamma](double v) { return v > 0.0 ? v : gamma * v; });
  return (phi.transpose() * a).cwiseProduct(y);
}

Matrix slopes(const Matrix& P, double gamma) {
  return P.unaryExpr([gamma](double v) { return v > 0.0 ? 1.0 : gamma; });
}

}  // namespace

NetworkParams::NetworkParams(Matrix W, double gamma) : W_(std::move(W)), gamma_(gamma) {
  const auto m = W_.rows();
  require(m >= 2 && m % 2 == 0, "network width m must be even and >= 2");
  require(W_.cols() >= 1, "network input dimension must be >= 1");
  require(W_.allFinite(), "network weights must be finite");
  check_gamma(gamma);
  const double s = 1.0 / std::sqrt(static_cast<double>(m));
  a_ = Vector::Constant(m, s);
  a_.tail(m / 2).setConstant(-s);
}

NetworkParams NetworkParams::with_weights(Matrix W) const {
  require(W.rows() == W_.rows() && W.cols() == W_.cols(), "weight shape changed");
  return NetworkParams(std::move(W), gamma_);
}

std::string to_string(Loss l) { return l == Loss::kLogistic ? "logistic" : "exponential"; }

Loss loss_from_string(const std::string& s) {
  if (s == "logistic") return Loss::kLogistic;
  if (s == "exponential") return Loss::kExponential;
  throw ValidationError("unknown loss '" + s + "'");
}

NetworkParams init_network(std::size_t m, std::size_t d, double gamma, double scale,
                           std::uint64_t seed) {
  require(m >= 2 && m % 2 == 0, "network width m must be even and >= 2");
  require(d >= 1, "input dimension must be >= 1");
  require(std::isfinite(scale) && scale >= 0.0, "init scale must be >= 0");
  Matrix W = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  if (scale > 0.0) {
    const RowStream rs(seed, Stream::kInit);
    for (std::size_t j = 0; j < m; ++j) {
      auto row = W.row(static_cast<Eigen::Index>(j));
      rs.normals(j, std::span<double>(row.data(), d));
    }
    W *= scale / std::sqrt(static_cast<double>(d));
  }
  return NetworkParams(std::move(W), gamma);
}

double forward(const NetworkParams& params, const Vector& x) {
  require(static_cast<std::size_t>(x.size()) == params.d(), "input has the wrong dimension");
  const Vector p = params.W() * x;
  const double g = params.gamma();
  double f = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) f += params.a()(j) * (p(j) > 0.0 ? p(j) : g * p(j));
  return f;
}

Vector forward_batch(const NetworkParams& params, const Matrix& X) {
  require(static_cast<std::size_t>(X.cols()) == params.d(), "inputs have the wrong dimension");
  const double g = params.gamma();
  const Matrix P = X * params.W().transpose();  // N x m
  const Matrix phi = P.unaryExpr([g](double v) { return v > 0.0 ? v : g * v; });
  return phi * params.a();
}

LossGrad loss_and_grad(const NetworkParams& params, const Dataset& data, Loss loss) {
  require(data.d() == params.d(), "dataset and network dimensions differ");
  const Vector y = data.y_obs.cast<double>();
  const Matrix P = params.W() * data.X.transpose();  // m x n
  const Vector q = signed_outputs(P, params.a(), params.gamma(), y);
  const RiskState rs = risk(loss, q);
  LossGrad out;
  out.log_loss = rs.log_risk;
  out.loss = std::exp(rs.log_risk);
  const double n = static_cast<double>(data.n());
  // dL/dw_j = (1/n) sum_i l'(q_i) y_i a_j phi'_ji x_i, with l' < 0.
  const Vector coef = -(rs.log_slope.array().exp() / n).matrix().cwiseProduct(y);
  Matrix D = slopes(P, params.gamma());
  D.array().rowwise() *= coef.transpose().array();
  D.array().colwise() *= params.a().array();
  out.grad = D * data.X;
  return out;
}

void TrainConfig::validate() const {
  require(base_lr >= 0.0 && std::isfinite(base_lr), "base_lr must be >= 0");
  require(max_steps >= 1, "max_steps must be >= 1");
  require(checkpoint_every >= 1, "checkpoint_every must be >= 1");
  require(dir_tol > 0.0 && dir_tol < 1.0, "dir_tol must lie in (0, 1)");
  require(margin_tol > 0.0, "margin_tol must be positive");
  require(margin_window >= 1, "margin_window must be >= 1");
  require(!std::isnan(log_loss_floor), "log_loss_floor must not be NaN");
}

// Iterates are W(t) = W0 + C(t) X: every gradient lies in the row span of X,
// so this is exact gradient descent at O(m n^2) per step.
TrainResult train_to_margin(const NetworkParams& params, const Dataset& data,
                            const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  require(data.d() == params.d(), "dataset and network dimensions differ");
  const auto m = static_cast<Eigen::Index>(params.m());
  const auto n = static_cast<Eigen::Index>(data.n());
  const Vector& a = params.a();
  const double gamma = params.gamma();
  const Vector y = data.y_obs.cast<double>();
  const Matrix G = data.X * data.X.transpose();
  const Matrix B = params.W() * data.X.transpose();
  const double s0 = params.W().squaredNorm();
  const double lr = cfg.base_lr > 0.0 ? cfg.base_lr : 0.5 / G.diagonal().maxCoeff();
  const double target = std::log(kLog2 / static_cast<double>(n));

  Matrix C = Matrix::Zero(m, n);
  Matrix P = B;
  Vector q = signed_outputs(P, a, gamma, y);
  RiskState rs = risk(cfg.loss, q);

  auto inner = [&](const Matrix& Ca, const Matrix& Cb) {
    return s0 + (Ca.cwiseProduct(B)).sum() + (Cb.cwiseProduct(B)).sum() +
           ((Ca * G).cwiseProduct(Cb)).sum();
  };

  TrainTrace trace;
  Matrix C_prev;
  bool have_prev = false;
  bool reached = false;
  std::string reason;

  auto checkpoint = [&](std::size_t step) {
    P = B + C * G;  // refresh accumulated drift
    q = signed_outputs(P, a, gamma, y);
    rs = risk(cfg.loss, q);
    TracePoint tp;
    tp.step = step;
    tp.log_loss = rs.log_risk;
    tp.loss = std::exp(rs.log_risk);
    const double nn = inner(C, C);
    tp.w_norm = std::sqrt(std::max(0.0, nn));
    tp.min_normalized_margin = tp.w_norm > 0.0 ? q.minCoeff() / tp.w_norm : 0.0;
    if (have_prev) {
      const double pp = inner(C_prev, C_prev);
      const double denom = std::sqrt(std::max(0.0, pp) * std::max(0.0, nn));
      tp.cosine = denom > 0.0 ? inner(C_prev, C) / denom : 0.0;
    }
    trace.points.push_back(tp);
    C_prev = C;
    have_prev = true;
    if (rs.log_risk < target) reached = true;
    if (!reached || step < cfg.min_steps || trace.points.size() <= cfg.margin_window) return false;
    const bool dir_ok = tp.cosine >= 1.0 - cfg.dir_tol;
    const auto& old = trace.points[trace.points.size() - 1 - cfg.margin_window];
    const double ref = std::max(std::abs(tp.min_normalized_margin), 1e-300);
    const bool margin_ok =
        std::abs(tp.min_normalized_margin - old.min_normalized_margin) < cfg.margin_tol * ref;
    return dir_ok && margin_ok;
  };

  bool done = checkpoint(0);
  if (done) reason = "converged";
  std::size_t step = 0;
  while (!done && step < cfg.max_steps) {
    // Step lr / L on the gradient of L. In coefficient space the weights are
    // |l'(q_i)| / (n L) = exp(log|l'_i| - log n - log L), kept in log space.
    const double shift =
        std::log(static_cast<double>(n)) + std::max(rs.log_risk, cfg.log_loss_floor);
    const Vector w = (rs.log_slope.array() - shift).exp().matrix().cwiseProduct(y);
    Matrix Delta = slopes(P, gamma);
    Delta.array().rowwise() *= w.transpose().array();
    Delta.array().colwise() *= a.array();
    const Matrix DG = Delta * G;
    double eta = lr;
    bool accepted = false;
    for (std::size_t bt = 0; bt <= cfg.max_backtracks; ++bt) {
      const Matrix Pc = P + eta * DG;
      const Vector qc = signed_outputs(Pc, a, gamma, y);
      const RiskState rc = risk(cfg.loss, qc);
      if (rc.log_risk <= rs.log_risk) {
        C += eta * Delta;
        P = Pc;
        q = qc;
        rs = rc;
        accepted = true;
        break;
      }
      eta *= 0.5;
      ++trace.backtracks;
    }
    ++step;
    if (!accepted) {
      reason = "stalled";
      break;
    }
    if (step % cfg.checkpoint_every == 0) {
      done = checkpoint(step);
      if (done) reason = "converged";
    }
  }
  if (step % cfg.checkpoint_every != 0 || reason == "stalled") {
    if (checkpoint(step) && reason.empty()) reason = "converged";
  }
  if (reason.empty()) reason = "max_steps";
  trace.stop_reason = reason;
  trace.steps = step;
  NetworkParams final_params = params.with_weights(params.W() + C * data.X);
  if (!reached) {
    throw TrainingFailureWithTrace(
        reason == "stalled" ? "training stalled before the risk fell below log(2)/n"
                            : "step budget exhausted before the risk fell below log(2)/n",
        std::move(trace), std::move(final_params));
  }
  TrainResult out;
  out.params = std::move(final_params);
  out.trace = std::move(trace);
  return out;
}

NetworkParams rescale_to_unit_margin(const NetworkParams& params, const Dataset& data) {
  require(data.d() == params.d(), "dataset and network dimensions differ");
  const Vector q = forward_batch(params, data.X).cwiseProduct(data.y_obs.cast<double>());
  const double c = q.minCoeff();
  require(c > 0.0, "rescaling needs a positive minimum margin");
  if (c == 1.0) return params;
  return params.with_weights(params.W() / c);
}

KktCertificate extract_net_kkt(const NetworkParams& params, const Dataset& data,
                               double tol_kink) {
  CertifyOptions o;
  o.tol_kink = tol_kink;
  return extract_net_kkt(params, data, o);
}

KktCertificate extract_net_kkt(const NetworkParams& input, const Dataset& data,
                               const CertifyOptions& opts) {
  require(opts.tol_kink >= 0.0, "tol_kink must be >= 0");
  KktCertificate cert;
  cert.params = rescale_to_unit_margin(input, data);
  const NetworkParams& net = cert.params;
  const auto n = static_cast<Eigen::Index>(data.n());
  const double gamma = net.gamma();
  const Vector y = data.y_obs.cast<double>();
  const Vector& a = net.a();
  const Matrix& W = net.W();
  const Matrix P = W * data.X.transpose();  // m x n
  const Vector wn = W.rowwise().norm();
  const Vector xn = data.X.rowwise().norm();

  // Kinks get the default selection gamma and are counted.
  Matrix S(P.rows(), P.cols());
  double min_ratio = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < P.rows(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double scale = wn(j) * xn(i);
      const double ratio = scale > 0.0 ? std::abs(P(j, i)) / scale : 0.0;
      min_ratio = std::min(min_ratio, ratio);
      const bool kink = ratio <= opts.tol_kink;
      if (kink && gamma < 1.0) ++cert.kink_count;
      S(j, i) = (!kink && P(j, i) > 0.0) ? 1.0 : gamma;
    }
  }
  cert.min_abs_preactivation_ratio = min_ratio;

  // psi_i has block j = a_j y_i S_ji x_i.
  // H_ik = <psi_i, psi_k> = y_i y_k G_ik sum_j a_j^2 S_ji S_jk
  // g_i = <psi_i, W> = y_i sum_j a_j S_ji P_ji
  const Matrix G = data.X * data.X.transpose();
  Matrix AS = S;
  AS.array().colwise() *= a.array();
  Eigen::MatrixXd H = (AS.transpose() * AS).cwiseProduct(G);
  H.array().colwise() *= y.array();
  H.array().rowwise() *= y.transpose().array();
  const Eigen::VectorXd g = (AS.cwiseProduct(P)).colwise().sum().transpose().cwiseProduct(y);
  const NnlsResult sol = nnls_gram(H, g);
  cert.nnls_converged = sol.converged;
  cert.lambda = sol.x;

  Matrix D = AS;
  D.array().rowwise() *= cert.lambda.cwiseProduct(y).transpose().array();
  const Matrix R = W - D * data.X;
  const double Wn = W.norm();
  require(Wn > 0.0, "cannot certify the zero network");
  cert.stationarity_residual = R.norm() / Wn;

  const Vector q = signed_outputs(P, a, gamma, y);
  cert.feasibility_min = q.minCoeff() - 1.0;
  cert.comp_slack_max = cert.lambda.cwiseProduct((q.array() - 1.0).abs().matrix()).maxCoeff();
  const double lmax = cert.lambda.maxCoeff();
  if (cert.lambda.minCoeff() > 0.0) cert.tau = uniformity_ratio(0.5 * (1.0 + gamma) * cert.lambda);
  cert.passes = cert.nnls_converged && cert.kink_count == 0 &&
                cert.stationarity_residual <= opts.tol_stationarity &&
                cert.feasibility_min >= -opts.tol_feasibility &&
                cert.comp_slack_max <= opts.tol_comp_slack * lmax && cert.lambda.minCoeff() >= 0.0;
  return cert;
}

LambdaBounds lambda_bounds_leaky(const OrthogonalityProfile& profile, double gamma, double p) {
  check_gamma(gamma);
  require(p >= 3.0 / (gamma * gamma * gamma), "leaky multiplier bounds need p >= 3 / gamma^3");
  require(profile.r_min_sq > 0.0 && profile.r_max_sq >= profile.r_min_sq,
          "invalid orthogonality profile");
  LambdaBounds b;
  if (std::isinf(p)) {
    b.lower = 1.0 / profile.r_max_sq;
    b.upper = 1.0 / (profile.r_min_sq * gamma * gamma);
    return b;
  }
  const double pr = p * profile.r_sq;
  b.lower = (1.0 - 1.0 / (gamma * pr - 1.0)) / profile.r_max_sq;
  b.upper = 1.0 / (profile.r_min_sq * gamma * (gamma - 1.0 / pr));
  return b;
}

double tau_bound_leaky(double p, double r_sq, double gamma) {
  check_gamma(gamma);
  require(p >= 3.0 / (gamma * gamma * gamma), "leaky tau bound needs p >= 3 / gamma^3");
  require(std::isfinite(r_sq) && r_sq >= 1.0, "R^2 must be >= 1");
  if (std::isinf(p)) return r_sq / (gamma * gamma);
  const double gpr = gamma * p * r_sq;
  require(gpr > 2.0, "leaky tau bound undefined for gamma p R^2 <= 2");
  return r_sq / (gamma * gamma) * (1.0 + 2.0 / (gpr - 2.0));
}

Vector effective_linear_direction(const Vector& lambda, const Dataset& data, double gamma) {
  require(static_cast<std::size_t>(lambda.size()) == data.n(), "lambda has the wrong length");
  require(lambda.size() == 0 || lambda.minCoeff() >= 0.0, "multipliers must be >= 0");
  return 0.5 * (1.0 + gamma) * (data.X.transpose() * lambda.cwiseProduct(data.y_obs.cast<double>()));
}

AgreementResult boundary_agreement(const NetworkParams& params, const Vector& z,
                                   const std::optional<DistributionSpec>& probe_spec,
                                   std::size_t N, std::uint64_t seed, double band) {
  const auto d = params.d();
  require(static_cast<std::size_t>(z.size()) == d, "z has the wrong dimension");
  require(z.norm() > 0.0, "boundary agreement needs z != 0");
  require(N >= 1, "need at least one probe");
  require(band >= 0.0, "exclusion band must be >= 0");
  if (probe_spec) require(spec_dim(*probe_spec) == d, "probe distribution has the wrong dimension");
  const double zn = z.norm();
  const std::uint64_t probe_seed = derive_seed(seed, static_cast<std::uint64_t>(Stream::kProbes));
  const RowStream iso(seed, Stream::kProbes);
  constexpr std::size_t kChunk = 512;
  AgreementResult r;
  std::size_t agree = 0;
  for (std::size_t first = 0; first < N; first += kChunk) {
    const std::size_t cnt = std::min(kChunk, N - first);
    Matrix Xp;
    if (probe_spec) {
      Xp = sample_rows(*probe_spec, probe_seed, first, cnt).X;
    } else {
      Xp.resize(static_cast<Eigen::Index>(cnt), static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < cnt; ++i) {
        auto row = Xp.row(static_cast<Eigen::Index>(i));
        iso.normals(first + i, std::span<double>(row.data(), d));
      }
    }
    const Vector f = forward_batch(params, Xp);
    const Vector s = Xp * z;
    const Vector xn = Xp.rowwise().norm();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (std::abs(s(i)) < band * zn * xn(i)) {
        ++r.excluded;
        continue;
      }
      ++r.compared;
      if (sign_of(f(i)) == sign_of(s(i))) ++agree;
    }
  }
  if (r.compared == 0) throw DegenerateError("every probe fell inside the exclusion band");
  r.fraction = static_cast<double>(agree) / static_cast<double>(r.compared);
  return r;
}

}  // namespace kktlab
