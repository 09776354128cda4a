#include "kktlab/eval.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "kktlab/errors.hpp"
#include "kktlab/rng.hpp"

namespace kktlab {

std::size_t predictor_dim(const Predictor& p) {
  if (const auto* w = std::get_if<Vector>(&p)) return static_cast<std::size_t>(w->size());
  return std::get<NetworkParams>(p).d();
}

Vector predictor_scores(const Predictor& p, const Matrix& X) {
  require(static_cast<std::size_t>(X.cols()) == predictor_dim(p), "predictor dimension mismatch");
  if (const auto* w = std::get_if<Vector>(&p)) return X * (*w);
  return forward_batch(std::get<NetworkParams>(p), X);
}

InterpolationResult interpolation_check(const Predictor& p, const Dataset& data) {
  const Vector s = predictor_scores(p, data.X);
  InterpolationResult r;
  r.margins = s.cwiseProduct(data.y_obs.cast<double>());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (sign_of(s(i)) != data.y_obs(i)) ++r.train_errors;
  r.interpolates = r.train_errors == 0;
  return r;
}

std::string to_string(ErrorMethod m) {
  switch (m) {
    case ErrorMethod::kMonteCarlo:
      return "monte_carlo";
    case ErrorMethod::kClosedForm:
      return "closed_form";
    case ErrorMethod::kEmpiricalTrain:
      return "empirical_train";
  }
  return "monte_carlo";
}

ErrorEstimate wilson_interval(std::size_t k, std::size_t N, double level) {
  require(N >= 1, "need at least one sample");
  require(k <= N, "more errors than samples");
  require(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
  const boost::math::normal nd;
  const double z = boost::math::quantile(nd, 1.0 - 0.5 * (1.0 - level));
  const double nn = static_cast<double>(N);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  ErrorEstimate e;
  e.point_estimate = p;
  e.ci_low = std::clamp(std::min(center - half, p), 0.0, 1.0);
  e.ci_high = std::clamp(std::max(center + half, p), 0.0, 1.0);
  e.n_samples = N;
  e.method = ErrorMethod::kMonteCarlo;
  return e;
}

ErrorEstimate test_error_mc(const Predictor& p, const DistributionSpec& spec, std::size_t N,
                            std::uint64_t seed, double ci_level, unsigned workers) {
  return test_errors_mc({p}, spec, N, seed, ci_level, workers).front();
}

std::vector<ErrorEstimate> test_errors_mc(const std::vector<Predictor>& ps,
                                          const DistributionSpec& spec, std::size_t N,
                                          std::uint64_t seed, double ci_level, unsigned workers) {
  require(N >= 1, "need at least one test draw");
  require(!ps.empty(), "need at least one predictor");
  validate_spec(spec);
  for (const auto& p : ps)
    require(spec_dim(spec) == predictor_dim(p), "predictor and distribution dimensions differ");
  constexpr std::size_t kChunk = 1024;
  const std::uint64_t test_seed = derive_seed(seed, static_cast<std::uint64_t>(Stream::kTestDraws));
  const std::size_t chunks = (N + kChunk - 1) / kChunk;
  const std::size_t np = ps.size();
  std::vector<std::size_t> errors(chunks * np, 0);
  auto work = [&](std::size_t c) {
    const std::size_t first = c * kChunk;
    const std::size_t cnt = std::min(kChunk, N - first);
    const Dataset ds = sample_rows(spec, test_seed, first, cnt);
    for (std::size_t k = 0; k < np; ++k) {
      const Vector s = predictor_scores(ps[k], ds.X);
      std::size_t e = 0;
      for (Eigen::Index i = 0; i < s.size(); ++i)
        if (sign_of(s(i)) != ds.y_obs(i)) ++e;
      errors[c * np + k] = e;
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(chunks)));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t c = t; c < chunks; c += workers) work(c);
      });
    }
    for (auto& th : pool) th.join();
  }
  std::vector<ErrorEstimate> out;
  for (std::size_t k = 0; k < np; ++k) {
    std::size_t total = 0;
    for (std::size_t c = 0; c < chunks; ++c) total += errors[c * np + k];
    out.push_back(wilson_interval(total, N, ci_level));
  }
  return out;
}

ErrorEstimate test_error_exact_sg_gaussian(const Vector& w, const SgSpec& spec) {
  spec.validate();
  require(spec.base_dist == BaseDist::kGaussian, "closed-form error needs a Gaussian base");
  require(static_cast<std::size_t>(w.size()) == spec.dim(), "w has the wrong dimension");
  require(w.norm() > 0.0, "closed-form error needs w != 0");
  const double quad = spec.lambda.dot(w.cwiseAbs2());
  require(quad > 0.0, "degenerate w^T Sigma w");
  const double rho = std::clamp(std::sqrt(spec.lambda(0)) * w(0) / std::sqrt(quad), -1.0, 1.0);
  const double clean = std::acos(rho) / std::numbers::pi;
  ErrorEstimate e;
  e.point_estimate = spec.eta + (1.0 - 2.0 * spec.eta) * clean;
  e.ci_low = e.ci_high = e.point_estimate;
  e.method = ErrorMethod::kClosedForm;
  return e;
}

OppDecomposition opp_signal_decomposition(const Dataset& data, const Vector& s,
                                          std::size_t test_draws, std::uint64_t seed) {
  require(data.spec != nullptr && std::holds_alternative<OppSpec>(*data.spec),
          "signal decomposition needs data sampled from an opposing-cluster spec");
  require(static_cast<std::size_t>(s.size()) == data.n(), "s has the wrong length");
  const OppSpec& spec = std::get<OppSpec>(*data.spec);
  require(static_cast<std::size_t>(spec.mu.size()) == data.d(), "mu has the wrong dimension");
  const Vector y = data.y_obs.cast<double>();
  const Vector yt = data.y_clean.cast<double>();
  const double n = static_cast<double>(data.n());
  const double d = static_cast<double>(data.d());

  OppDecomposition r;
  const Vector sy = s.cwiseProduct(y);
  r.label_balance = sy.dot(yt);
  r.signal_norm = std::abs(r.label_balance) * spec.mu.norm();
  // z_i = x_i - y~_i mu
  r.residual = data.X.transpose() * sy - (sy.dot(yt)) * spec.mu;
  r.d_over_n = d / n;
  r.test_scale = (spec.mu.norm() + std::sqrt(d)) / std::sqrt(n);
  if (r.label_balance == 0.0) {
    throw DegenerateError("label balance is zero: xi is undefined");
  }
  r.xi = r.residual / r.label_balance;
  r.train_min = (data.X * r.xi).cwiseProduct(y).minCoeff();
  r.test_draws = test_draws;
  if (test_draws > 0) {
    const Dataset t = sample_rows(*data.spec,
                                  derive_seed(seed, static_cast<std::uint64_t>(Stream::kTestDraws)),
                                  0, test_draws);
    r.test_max = (t.X * r.xi).cwiseProduct(t.y_obs.cast<double>()).cwiseAbs().maxCoeff();
  }
  r.train_ratio = r.train_min / r.d_over_n;
  r.test_ratio = r.test_max / r.test_scale;
  return r;
}

}  // namespace kktlab
