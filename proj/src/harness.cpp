#include "kktlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "kktlab/bounds.hpp"
#include "kktlab/errors.hpp"
#include "kktlab/eval.hpp"
#include "kktlab/geometry.hpp"

namespace kktlab {

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ValidationError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ValidationError(std::string("bad value for '") + key + "'");
  }
}

template <typename T>
T need(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError("missing '" + std::string(key) + "' in " + where);
  return get_or<T>(j, key, T{});
}

std::size_t need_count(const Json& j, const char* key, const std::string& where) {
  const double v = need<double>(j, key, where);
  if (!(v >= 1.0) || v != std::floor(v)) throw ValidationError(std::string(key) + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

IntVector alternating_labels(std::size_t k) {
  IntVector l(static_cast<Eigen::Index>(k));
  for (std::size_t q = 0; q < k; ++q) l(static_cast<Eigen::Index>(q)) = q % 2 == 0 ? 1 : -1;
  return l;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string cell(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_same_v<T, bool>) return *v ? "true" : "false";
  else if constexpr (std::is_integral_v<T>) return std::to_string(*v);
  else return num(static_cast<double>(*v));
}

template <typename T>
Json jcell(const std::optional<T>& v) {
  if (!v) return nullptr;
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(*v)) return num(*v);
  }
  return Json(*v);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) {
    if (c == '"') o += '"';
    o += c == '\n' ? ' ' : c;
  }
  return o + "\"";
}

}  // namespace

std::string to_string(ModelKind k) { return k == ModelKind::kLinear ? "linear" : "leaky_net"; }

DistributionSpec build_distribution(const Json& j) {
  const std::string where = "distribution";
  if (!j.is_object()) throw ValidationError("distribution must be an object");
  const std::string type = need<std::string>(j, "type", where);
  const double eta = need<double>(j, "eta", where);
  if (type == "gaus") {
    check_keys(j, {"type", "d", "rho", "eta"}, where);
    return SgSpec::gaussian_spiked(need_count(j, "d", where), need<double>(j, "rho", where), eta);
  }
  if (type == "sg") {
    check_keys(j, {"type", "lambda", "d", "lambda_1", "base_dist", "eta", "beta"}, where);
    SgSpec s;
    if (j.contains("lambda")) {
      s.lambda = vector_from_json(j.at("lambda"));
    } else {
      s.lambda = Vector::Ones(static_cast<Eigen::Index>(need_count(j, "d", where)));
      s.lambda(0) = get_or<double>(j, "lambda_1", 1.0);
    }
    s.base_dist = base_dist_from_string(get_or<std::string>(j, "base_dist", "gaussian"));
    s.beta = get_or<double>(j, "beta", s.beta);
    s.eta = eta;
    s.validate();
    return s;
  }
  if (type == "clust") {
    check_keys(j, {"type", "d", "k", "mean_norm", "mean_norm_exponent", "labels", "means", "eta",
                   "base_dist", "noise_scale"},
               where);
    ClustSpec s;
    if (j.contains("means")) {
      s.means = matrix_from_json(j.at("means"));
    } else {
      const auto d = need_count(j, "d", where);
      const auto k = need_count(j, "k", where);
      double norm = 0.0;
      if (j.contains("mean_norm")) norm = get_or<double>(j, "mean_norm", 0.0);
      else if (j.contains("mean_norm_exponent"))
        norm = std::pow(static_cast<double>(d), get_or<double>(j, "mean_norm_exponent", 0.0));
      else throw ValidationError("clust distribution needs means, mean_norm or mean_norm_exponent");
      require(k <= d, "orthogonal means need k <= d");
      s.means = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
      for (std::size_t q = 0; q < k; ++q)
        s.means(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q)) = norm;
    }
    if (j.contains("labels")) {
      const auto& l = j.at("labels");
      s.cluster_labels.resize(static_cast<Eigen::Index>(l.size()));
      for (std::size_t q = 0; q < l.size(); ++q) s.cluster_labels(static_cast<Eigen::Index>(q)) = l[q].get<int>();
    } else {
      s.cluster_labels = alternating_labels(static_cast<std::size_t>(s.means.rows()));
    }
    s.base_dist = base_dist_from_string(get_or<std::string>(j, "base_dist", "gaussian"));
    s.noise_scale = get_or<double>(j, "noise_scale", 1.0);
    s.eta = eta;
    s.validate();
    return s;
  }
  if (type == "opp") {
    check_keys(j, {"type", "d", "mu_norm", "mu", "eta"}, where);
    OppSpec s;
    if (j.contains("mu")) {
      s.mu = vector_from_json(j.at("mu"));
    } else {
      s.mu = Vector::Zero(static_cast<Eigen::Index>(need_count(j, "d", where)));
      s.mu(0) = need<double>(j, "mu_norm", where);
    }
    s.eta = eta;
    s.validate();
    return s;
  }
  throw ValidationError("unknown distribution type '" + type + "'");
}

void ExperimentConfig::validate() const {
  validate_spec(spec);
  require(n >= 1, "n must be >= 1");
  require(!seeds.empty(), "seed list must be nonempty");
  if (model == ModelKind::kLeakyNet) {
    require(m >= 2 && m % 2 == 0, "m must be even and >= 2");
    require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
    require(init_scale >= 0.0, "init_scale must be >= 0");
    training.validate();
  }
  require(solver.tol > 0.0 && solver.max_iter >= 1, "invalid solver settings");
  require(eval.n_test >= 1, "n_test must be >= 1");
  require(eval.ci_level > 0.0 && eval.ci_level < 1.0, "ci_level must lie in (0, 1)");
  require(eval.exclusion_band >= 0.0, "exclusion_band must be >= 0");
  require(constants.C > 1.0, "constant C must exceed 1");
  require(constants.delta > 0.0 && constants.delta < 0.5, "delta must lie in (0, 1/2)");
  require(constants.c_prime > 0.0, "c_prime must be positive");
  if (std::holds_alternative<ClustSpec>(spec)) {
    require(constants.Delta.has_value(), "cluster experiments need the constant Delta");
  }
  require(format == "csv" || format == "json", "format must be csv or json");
}

ExperimentConfig parse_config(const Json& j) {
  check_keys(j, {"name", "distribution", "n", "seeds", "model", "solver", "training", "certify", "eval",
                 "constants", "output", "seed_workers"},
             "config");
  ExperimentConfig c;
  c.source = j;
  c.name = get_or<std::string>(j, "name", c.name);
  if (!j.contains("distribution")) throw ValidationError("config needs a distribution");
  c.spec = build_distribution(j.at("distribution"));
  c.n = need_count(j, "n", "config");

  if (!j.contains("seeds")) throw ValidationError("config needs seeds");
  const Json& s = j.at("seeds");
  if (s.is_array()) {
    for (const auto& v : s) c.seeds.push_back(v.get<std::uint64_t>());
  } else if (s.is_object()) {
    check_keys(s, {"first", "count"}, "seeds");
    const auto first = get_or<std::uint64_t>(s, "first", 0);
    const auto count = need_count(s, "count", "seeds");
    for (std::size_t i = 0; i < count; ++i) c.seeds.push_back(first + i);
  } else {
    throw ValidationError("seeds must be a list or {first, count}");
  }

  if (j.contains("model")) {
    const Json& m = j.at("model");
    check_keys(m, {"type", "m", "gamma", "init_scale"}, "model");
    const std::string type = need<std::string>(m, "type", "model");
    if (type == "linear") c.model = ModelKind::kLinear;
    else if (type == "leaky_net") c.model = ModelKind::kLeakyNet;
    else throw ValidationError("unknown model type '" + type + "'");
    c.m = static_cast<std::size_t>(get_or<double>(m, "m", 32));
    c.gamma = get_or<double>(m, "gamma", c.gamma);
    c.init_scale = get_or<double>(m, "init_scale", c.init_scale);
  }
  if (j.contains("solver")) {
    const Json& v = j.at("solver");
    check_keys(v, {"tol", "max_iter", "lambda_cap_factor", "polish_every"}, "solver");
    c.solver.tol = get_or<double>(v, "tol", c.solver.tol);
    c.solver.max_iter = get_or<std::size_t>(v, "max_iter", c.solver.max_iter);
    c.solver.lambda_cap_factor = get_or<double>(v, "lambda_cap_factor", c.solver.lambda_cap_factor);
    c.solver.polish_every = get_or<std::size_t>(v, "polish_every", c.solver.polish_every);
  }
  if (j.contains("training")) {
    const Json& v = j.at("training");
    check_keys(v, {"loss", "base_lr", "max_steps", "min_steps", "checkpoint_every", "dir_tol", "margin_tol",
                   "margin_window", "log_loss_floor", "max_backtracks"},
               "training");
    auto& t = c.training;
    if (v.contains("loss")) t.loss = loss_from_string(v.at("loss").get<std::string>());
    t.base_lr = get_or<double>(v, "base_lr", t.base_lr);
    t.max_steps = get_or<std::size_t>(v, "max_steps", t.max_steps);
    t.min_steps = get_or<std::size_t>(v, "min_steps", t.min_steps);
    t.checkpoint_every = get_or<std::size_t>(v, "checkpoint_every", t.checkpoint_every);
    t.dir_tol = get_or<double>(v, "dir_tol", t.dir_tol);
    t.margin_tol = get_or<double>(v, "margin_tol", t.margin_tol);
    t.margin_window = get_or<std::size_t>(v, "margin_window", t.margin_window);
    t.log_loss_floor = get_or<double>(v, "log_loss_floor", t.log_loss_floor);
    t.max_backtracks = get_or<std::size_t>(v, "max_backtracks", t.max_backtracks);
  }
  if (j.contains("certify")) {
    const Json& v = j.at("certify");
    check_keys(v, {"tol_kink", "tol_stationarity", "tol_comp_slack", "tol_feasibility"}, "certify");
    auto& o = c.certify;
    o.tol_kink = get_or<double>(v, "tol_kink", o.tol_kink);
    o.tol_stationarity = get_or<double>(v, "tol_stationarity", o.tol_stationarity);
    o.tol_comp_slack = get_or<double>(v, "tol_comp_slack", o.tol_comp_slack);
    o.tol_feasibility = get_or<double>(v, "tol_feasibility", o.tol_feasibility);
  }
  if (j.contains("eval")) {
    const Json& v = j.at("eval");
    check_keys(v, {"n_test", "ci_level", "probe_count", "exclusion_band", "probes", "workers"}, "eval");
    auto& e = c.eval;
    e.n_test = get_or<std::size_t>(v, "n_test", e.n_test);
    e.ci_level = get_or<double>(v, "ci_level", e.ci_level);
    e.probe_count = get_or<std::size_t>(v, "probe_count", e.probe_count);
    e.exclusion_band = get_or<double>(v, "exclusion_band", e.exclusion_band);
    const auto probes = get_or<std::string>(v, "probes", "distribution");
    if (probes != "distribution" && probes != "isotropic")
      throw ValidationError("eval.probes must be 'distribution' or 'isotropic'");
    e.probes_from_distribution = probes == "distribution";
    e.workers = get_or<unsigned>(v, "workers", e.workers);
  }
  if (j.contains("constants")) {
    const Json& v = j.at("constants");
    check_keys(v, {"C", "delta", "c_prime", "Delta", "c"}, "constants");
    auto& k = c.constants;
    k.C = get_or<double>(v, "C", k.C);
    k.delta = get_or<double>(v, "delta", k.delta);
    k.c_prime = get_or<double>(v, "c_prime", k.c_prime);
    if (v.contains("Delta")) k.Delta = get_or<double>(v, "Delta", 0.0);
    k.c = get_or<double>(v, "c", k.c);
  }
  if (j.contains("output")) {
    const Json& v = j.at("output");
    check_keys(v, {"dir", "format"}, "output");
    c.out_dir = get_or<std::string>(v, "dir", c.out_dir);
    c.format = get_or<std::string>(v, "format", c.format);
  }
  c.seed_workers = get_or<unsigned>(j, "seed_workers", 1);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord r;
  r.experiment = cfg.name;
  r.model = cfg.model;
  r.seed = seed;
  r.n = cfg.n;
  r.d = spec_dim(cfg.spec);
  r.eta = spec_eta(cfg.spec);
  if (cfg.model == ModelKind::kLeakyNet) {
    r.m = cfg.m;
    r.gamma = cfg.gamma;
  }
  try {
    const Dataset data = sample(cfg.spec, cfg.n, seed);
    if (data.n() >= 2) r.profile = orthogonality_profile(data);

    if (const auto* sg = std::get_if<SgSpec>(&cfg.spec)) {
      const auto rep = sg_assumption_report(*sg, cfg.n, cfg.constants.delta, cfg.constants.C);
      r.assumptions = to_json(rep);
      r.assumptions_ok = rep.all_satisfied();
      r.bound = sg_test_bound(sg->lambda, sg->eta, cfg.constants.c_prime);
    } else if (const auto* cl = std::get_if<ClustSpec>(&cfg.spec)) {
      const auto rep = clust_assumption_report(*cl, cfg.n, cfg.constants.delta, cfg.constants.C);
      r.assumptions = to_json(rep);
      r.assumptions_ok = rep.all_satisfied();
      r.bound = clust_test_bound(cl->means, cfg.n, cl->k(), cl->dim(), cl->eta, cfg.constants.c_prime);
    }

    std::optional<Predictor> pred;
    double p_star = r.profile ? r.profile->p_star_or_inf() : 0.0;
    if (cfg.model == ModelKind::kLinear) {
      const MarginSolution sol = solve_max_margin(data, cfg.solver);
      const KktReport kkt = verify_linear_kkt(sol, data, 1e-6);
      r.kkt_residual = kkt.stationarity;
      r.kkt_passes = kkt.passes;
      r.lambda_min = sol.lambda.minCoeff();
      r.lambda_max = sol.lambda.maxCoeff();
      if (sol.lambda.minCoeff() > 0.0) r.tau_measured = uniformity_ratio(sol.lambda);
      if (r.profile && p_star >= 3.0) {
        const auto b = lambda_bounds_linear(*r.profile, p_star);
        r.lambda_lower_bound = b.lower;
        r.lambda_upper_bound = b.upper;
        r.tau_bound = tau_bound_linear(p_star, r.profile->r_sq);
        r.sandwich_ok = *r.lambda_min >= b.lower && *r.lambda_max <= b.upper &&
                        r.tau_measured && *r.tau_measured <= *r.tau_bound;
      }
      r.eta_hypothesis_ok = r.eta <= eta_limit_linear();
      pred = sol.w;
    } else {
      const NetworkParams init = init_network(cfg.m, data.d(), cfg.gamma, cfg.init_scale, seed);
      const TrainResult tr = train_to_margin(init, data, cfg.training);
      r.train_steps = tr.trace.steps;
      r.stop_reason = tr.trace.stop_reason;
      if (!tr.trace.points.empty()) {
        r.final_log_loss = tr.trace.points.back().log_loss;
        r.min_normalized_margin = tr.trace.points.back().min_normalized_margin;
      }
      pred = tr.params;
      const KktCertificate cert = extract_net_kkt(tr.params, data, cfg.certify);
      r.kkt_residual = cert.stationarity_residual;
      r.kkt_passes = cert.passes;
      r.kink_count = cert.kink_count;
      r.lambda_min = cert.lambda.minCoeff();
      r.lambda_max = cert.lambda.maxCoeff();
      r.tau_measured = cert.tau;
      const double gmin = 3.0 / (cfg.gamma * cfg.gamma * cfg.gamma);
      if (r.profile && p_star >= gmin) {
        const auto b = lambda_bounds_leaky(*r.profile, cfg.gamma, p_star);
        r.lambda_lower_bound = b.lower;
        r.lambda_upper_bound = b.upper;
        r.tau_bound = tau_bound_leaky(p_star, r.profile->r_sq, cfg.gamma);
        r.sandwich_ok = *r.lambda_min >= b.lower && *r.lambda_max <= b.upper && r.tau_measured &&
                        *r.tau_measured <= *r.tau_bound;
      }
      r.eta_hypothesis_ok = r.eta <= eta_limit_leaky(cfg.gamma);
      const Vector z = effective_linear_direction(cert.lambda, data, cfg.gamma);
      if (z.norm() > 0.0 && cfg.eval.probe_count > 0) {
        std::optional<DistributionSpec> probes;
        if (cfg.eval.probes_from_distribution) probes = cfg.spec;
        r.agreement = boundary_agreement(cert.params, z, probes, cfg.eval.probe_count, seed,
                                         cfg.eval.exclusion_band);
      }
    }
    if (std::holds_alternative<ClustSpec>(cfg.spec) && r.tau_measured) {
      // cluster bound needs eta <= 1/(1 + tau) - Delta
      r.eta_hypothesis_ok =
          *r.eta_hypothesis_ok && r.eta <= 1.0 / (1.0 + *r.tau_measured) - *cfg.constants.Delta;
    }

    const auto ic = interpolation_check(*pred, data);
    r.train_errors = ic.train_errors;
    r.interpolates = ic.interpolates;
    r.test_error = test_error_mc(*pred, cfg.spec, cfg.eval.n_test, seed, cfg.eval.ci_level, cfg.eval.workers);
    if (const auto* sg = std::get_if<SgSpec>(&cfg.spec)) {
      if (cfg.model == ModelKind::kLinear && sg->base_dist == BaseDist::kGaussian)
        r.closed_form_error = test_error_exact_sg_gaussian(std::get<Vector>(*pred), *sg).point_estimate;
    }
  } catch (const InfeasibleError& e) {
    r.status = "infeasible";
    r.error = e.what();
  } catch (const TrainingFailure& e) {
    r.status = "training_failure";
    r.error = e.what();
  } catch (const DegenerateError& e) {
    r.status = "degenerate";
    r.error = e.what();
  } catch (const ValidationError& e) {
    r.status = "invalid";
    r.error = e.what();
  }
  r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RunRecord> out(cfg.seeds.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.seed_workers, static_cast<unsigned>(cfg.seeds.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) out[i] = run_seed(cfg, cfg.seeds[i]);
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < cfg.seeds.size(); i += workers) out[i] = run_seed(cfg, cfg.seeds[i]);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

std::vector<std::string> record_columns(ModelKind model) {
  std::vector<std::string> c = {
      "schema_version", "experiment",   "model",          "seed",           "n",
      "d",              "eta",          "status",         "error",          "r_min_sq",
      "r_max_sq",       "r_sq",         "zeta",           "p_star",         "assumptions_ok",
      "train_errors",   "interpolates", "lambda_min",     "lambda_max",     "lambda_lower_bound",
      "lambda_upper_bound", "sandwich_ok", "tau_measured", "tau_bound",     "kkt_residual",
      "kkt_passes",     "test_error",   "test_ci_low",    "test_ci_high",   "n_test",
      "closed_form_error", "bound_value", "bound_raw",     "bound_formula",  "eta_hypothesis_ok"};
  if (model == ModelKind::kLeakyNet) {
    for (const char* s : {"m", "gamma", "train_steps", "stop_reason", "final_log_loss", "min_normalized_margin",
                          "kink_count", "agreement", "agreement_compared", "agreement_excluded"})
      c.emplace_back(s);
  }
  c.emplace_back("wall_clock_s");
  return c;
}

std::vector<std::string> record_row(const RunRecord& r) {
  const auto& p = r.profile;
  std::vector<std::string> v = {
      std::to_string(kSchemaVersion),
      r.experiment,
      to_string(r.model),
      std::to_string(r.seed),
      std::to_string(r.n),
      std::to_string(r.d),
      num(r.eta),
      r.status,
      r.error,
      p ? num(p->r_min_sq) : "",
      p ? num(p->r_max_sq) : "",
      p ? num(p->r_sq) : "",
      p ? num(p->zeta) : "",
      p ? num(p->p_star_or_inf()) : "",
      cell(r.assumptions_ok),
      cell(r.train_errors),
      cell(r.interpolates),
      cell(r.lambda_min),
      cell(r.lambda_max),
      cell(r.lambda_lower_bound),
      cell(r.lambda_upper_bound),
      cell(r.sandwich_ok),
      cell(r.tau_measured),
      cell(r.tau_bound),
      cell(r.kkt_residual),
      cell(r.kkt_passes),
      r.test_error ? num(r.test_error->point_estimate) : "",
      r.test_error ? num(r.test_error->ci_low) : "",
      r.test_error ? num(r.test_error->ci_high) : "",
      r.test_error ? std::to_string(r.test_error->n_samples) : "",
      cell(r.closed_form_error),
      r.bound ? num(r.bound->value) : "",
      r.bound ? num(r.bound->raw) : "",
      r.bound ? to_string(r.bound->formula_id) : "",
      cell(r.eta_hypothesis_ok)};
  if (r.model == ModelKind::kLeakyNet) {
    v.push_back(std::to_string(r.m));
    v.push_back(num(r.gamma));
    v.push_back(cell(r.train_steps));
    v.push_back(r.stop_reason);
    v.push_back(cell(r.final_log_loss));
    v.push_back(cell(r.min_normalized_margin));
    v.push_back(cell(r.kink_count));
    v.push_back(r.agreement ? num(r.agreement->fraction) : "");
    v.push_back(r.agreement ? std::to_string(r.agreement->compared) : "");
    v.push_back(r.agreement ? std::to_string(r.agreement->excluded) : "");
  }
  v.push_back(num(r.wall_clock_s));
  return v;
}

Json record_to_json(const RunRecord& r) {
  const auto cols = record_columns(r.model);
  const auto row = record_row(r);
  Json j = Json::object();
  for (std::size_t i = 0; i < cols.size(); ++i) j[cols[i]] = row[i];
  // Typed copies of the structured parts.
  j["schema_version"] = kSchemaVersion;
  j["profile"] = r.profile ? to_json(*r.profile) : Json(nullptr);
  j["assumptions"] = r.assumptions;
  j["test_error"] = r.test_error ? to_json(*r.test_error) : Json(nullptr);
  j["bound"] = r.bound ? to_json(*r.bound) : Json(nullptr);
  if (r.agreement) j["agreement"] = to_json(*r.agreement);
  j["wall_clock_s"] = r.wall_clock_s;
  return j;
}

std::string records_csv(const std::vector<RunRecord>& records, ModelKind model) {
  std::ostringstream os;
  const auto cols = record_columns(model);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : records) {
    const auto row = record_row(r);
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(row[i]);
    os << '\n';
  }
  return os.str();
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p);
  if (!os) throw ValidationError("cannot write '" + p.string() + "'");
  os << text;
  if (!os) throw ValidationError("failed writing '" + p.string() + "'");
}

std::filesystem::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

}  // namespace

std::string write_records(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
  const auto dir = prepare_dir(cfg.out_dir);
  if (cfg.format == "json") {
    Json j = {{"schema_version", kSchemaVersion}, {"config", cfg.source}, {"records", Json::array()}};
    for (const auto& r : records) j["records"].push_back(record_to_json(r));
    const auto p = dir / (cfg.name + ".json");
    write_text(p, j.dump(2) + "\n");
    return p.string();
  }
  const auto p = dir / (cfg.name + ".csv");
  write_text(p, records_csv(records, cfg.model));
  write_text(dir / (cfg.name + ".config.json"), cfg.source.dump(2) + "\n");
  return p.string();
}

namespace {

void patch_axis(Json& j, const std::string& axis, double value) {
  auto& dist = j["distribution"];
  auto& model = j["model"];
  auto as_count = [&](double v) {
    if (!(v >= 1.0) || v != std::floor(v)) throw ValidationError("axis " + axis + " needs positive integers");
    return static_cast<std::size_t>(v);
  };
  if (axis == "d") dist["d"] = as_count(value);
  else if (axis == "n") j["n"] = as_count(value);
  else if (axis == "eta") dist["eta"] = value;
  else if (axis == "rho") dist["rho"] = value;
  else if (axis == "gamma") model["gamma"] = value;
  else if (axis == "m") model["m"] = as_count(value);
  else if (axis == "mu_norm") dist["mu_norm"] = value;
  else if (axis == "mean_norm") {
    dist.erase("mean_norm_exponent");
    dist["mean_norm"] = value;
  } else if (axis == "init_scale") model["init_scale"] = value;
  else if (axis == "k") {
    dist["k"] = as_count(value);
    dist.erase("labels");
  } else throw ValidationError("unknown sweep axis '" + axis + "'");
}

}  // namespace

SweepResult sweep(const Json& cfg_template, const std::string& axis, const std::vector<double>& values) {
  if (std::find(sweep_axes().begin(), sweep_axes().end(), axis) == sweep_axes().end())
    throw ValidationError("unknown sweep axis '" + axis + "'");
  require(!values.empty(), "sweep needs at least one value");
  SweepResult out;
  for (double v : values) {
    Json j = cfg_template;
    patch_axis(j, axis, v);
    const ExperimentConfig cfg = parse_config(j);
    auto recs = run_experiment(cfg);
    SweepRow row;
    row.axis = axis;
    row.value = v;
    row.seeds = recs.size();
    std::vector<double> errs, bounds, pstars, taus, agr;
    std::size_t interp = 0;
    for (const auto& r : recs) {
      if (r.status != "ok") continue;
      ++row.ok;
      if (r.interpolates && *r.interpolates) ++interp;
      if (r.test_error) errs.push_back(r.test_error->point_estimate);
      if (r.bound) bounds.push_back(r.bound->value);
      if (r.profile && r.profile->p_star) pstars.push_back(*r.profile->p_star);
      if (r.tau_measured) taus.push_back(*r.tau_measured);
      if (r.agreement) agr.push_back(r.agreement->fraction);
    }
    row.interpolation_rate = row.seeds ? static_cast<double>(interp) / static_cast<double>(row.seeds) : 0.0;
    auto mean = [](const std::vector<double>& x) -> std::optional<double> {
      if (x.empty()) return std::nullopt;
      double s = 0.0;
      for (double v2 : x) s += v2;
      return s / static_cast<double>(x.size());
    };
    row.test_error_mean = mean(errs);
    if (row.test_error_mean) {
      // Normal interval for the mean over seeds at the configured level.
      double ss = 0.0;
      for (double e : errs) ss += (e - *row.test_error_mean) * (e - *row.test_error_mean);
      const double sd = errs.size() > 1 ? std::sqrt(ss / static_cast<double>(errs.size() - 1)) : 0.0;
      const boost::math::normal nd;
      const double z = boost::math::quantile(nd, 1.0 - 0.5 * (1.0 - cfg.eval.ci_level));
      const double half = z * sd / std::sqrt(static_cast<double>(errs.size()));
      row.test_error_ci_low = std::max(0.0, *row.test_error_mean - half);
      row.test_error_ci_high = std::min(1.0, *row.test_error_mean + half);
    }
    row.bound_mean = mean(bounds);
    row.p_star_mean = mean(pstars);
    row.tau_measured_mean = mean(taus);
    row.agreement_mean = mean(agr);
    out.rows.push_back(row);
    out.runs.push_back(std::move(recs));
  }
  return out;
}

std::vector<std::string> sweep_columns() {
  return {"schema_version",     "axis",           "value",          "seeds",       "ok",
          "interpolation_rate", "test_error_mean", "test_error_ci_low", "test_error_ci_high",
          "bound_mean",         "p_star_mean",    "tau_measured_mean", "agreement_mean"};
}

std::string sweep_csv(const SweepResult& s) {
  std::ostringstream os;
  const auto cols = sweep_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : s.rows) {
    os << kSchemaVersion << ',' << r.axis << ',' << num(r.value) << ',' << r.seeds << ',' << r.ok << ','
       << num(r.interpolation_rate) << ',' << cell(r.test_error_mean) << ',' << cell(r.test_error_ci_low) << ','
       << cell(r.test_error_ci_high) << ',' << cell(r.bound_mean) << ',' << cell(r.p_star_mean) << ','
       << cell(r.tau_measured_mean) << ',' << cell(r.agreement_mean) << '\n';
  }
  return os.str();
}

Json sweep_to_json(const SweepResult& s) {
  Json rows = Json::array();
  for (const auto& r : s.rows) {
    rows.push_back({{"axis", r.axis},
                    {"value", r.value},
                    {"seeds", r.seeds},
                    {"ok", r.ok},
                    {"interpolation_rate", r.interpolation_rate},
                    {"test_error_mean", jcell(r.test_error_mean)},
                    {"test_error_ci_low", jcell(r.test_error_ci_low)},
                    {"test_error_ci_high", jcell(r.test_error_ci_high)},
                    {"bound_mean", jcell(r.bound_mean)},
                    {"p_star_mean", jcell(r.p_star_mean)},
                    {"tau_measured_mean", jcell(r.tau_measured_mean)},
                    {"agreement_mean", jcell(r.agreement_mean)}});
  }
  return {{"schema_version", kSchemaVersion}, {"rows", rows}};
}

}  // namespace kktlab
