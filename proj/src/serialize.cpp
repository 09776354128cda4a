#include "kktlab/serialize.hpp"

#include <cmath>
#include <limits>

#include "kktlab/errors.hpp"

namespace kktlab {

namespace {

// JSON has no infinity; +inf is written as null where a field allows it.
Json opt_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw ValidationError("expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError("expected a numeric array");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Json matrix_to_json(const Matrix& M) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) a.push_back(vector_to_json(M.row(r).transpose()));
  return a;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("expected a nonempty array of rows");
  const auto cols = j[0].size();
  Matrix M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from_json(j[r]);
    if (static_cast<std::size_t>(row.size()) != cols) throw ValidationError("ragged matrix");
    M.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return M;
}

Json to_json(const DistributionSpec& spec) {
  return std::visit(
      [](const auto& s) -> Json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SgSpec>) {
          return {{"type", "sg"},
                  {"lambda", vector_to_json(s.lambda)},
                  {"base_dist", to_string(s.base_dist)},
                  {"eta", s.eta},
                  {"beta", s.beta}};
        } else if constexpr (std::is_same_v<T, ClustSpec>) {
          Json labels = Json::array();
          for (Eigen::Index q = 0; q < s.cluster_labels.size(); ++q) labels.push_back(s.cluster_labels(q));
          return {{"type", "clust"},
                  {"means", matrix_to_json(s.means)},
                  {"cluster_labels", labels},
                  {"eta", s.eta},
                  {"base_dist", to_string(s.base_dist)},
                  {"noise_scale", s.noise_scale}};
        } else {
          return {{"type", "opp"}, {"mu", vector_to_json(s.mu)}, {"eta", s.eta}};
        }
      },
      spec);
}

DistributionSpec spec_from_json(const Json& j) {
  const std::string type = field(j, "type").get<std::string>();
  DistributionSpec out;
  if (type == "sg") {
    SgSpec s;
    s.lambda = vector_from_json(field(j, "lambda"));
    s.eta = field(j, "eta").get<double>();
    if (j.contains("base_dist")) s.base_dist = base_dist_from_string(j.at("base_dist").get<std::string>());
    if (j.contains("beta")) s.beta = j.at("beta").get<double>();
    out = s;
  } else if (type == "clust") {
    ClustSpec s;
    s.means = matrix_from_json(field(j, "means"));
    const auto& labels = field(j, "cluster_labels");
    s.cluster_labels.resize(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t q = 0; q < labels.size(); ++q)
      s.cluster_labels(static_cast<Eigen::Index>(q)) = labels[q].get<int>();
    s.eta = field(j, "eta").get<double>();
    if (j.contains("base_dist")) s.base_dist = base_dist_from_string(j.at("base_dist").get<std::string>());
    if (j.contains("noise_scale")) s.noise_scale = j.at("noise_scale").get<double>();
    out = s;
  } else if (type == "opp") {
    OppSpec s;
    s.mu = vector_from_json(field(j, "mu"));
    s.eta = field(j, "eta").get<double>();
    out = s;
  } else {
    throw ValidationError("unknown distribution type '" + type + "'");
  }
  validate_spec(out);
  return out;
}

Json to_json(const OrthogonalityProfile& p) {
  return {{"r_min_sq", p.r_min_sq},
          {"r_max_sq", p.r_max_sq},
          {"r_sq", p.r_sq},
          {"zeta", p.zeta},
          {"p_star", opt_number(p.p_star)}};
}

Json to_json(const AssumptionReport& r) {
  Json a = Json::array();
  for (const auto& e : r.entries) {
    a.push_back({{"name", e.name},
                 {"lhs", e.lhs},
                 {"rhs", e.rhs},
                 {"satisfied", e.satisfied},
                 {"margin_ratio", std::isfinite(e.margin_ratio) ? Json(e.margin_ratio) : Json(nullptr)}});
  }
  return {{"entries", a}, {"all_satisfied", r.all_satisfied()}};
}

Json to_json(const MarginSolution& s) {
  return {{"kind", "linear"},
          {"w", vector_to_json(s.w)},
          {"lambda", vector_to_json(s.lambda)},
          {"margins", vector_to_json(s.margins)},
          {"objective", s.objective},
          {"iterations", s.iterations},
          {"converged", s.converged}};
}

MarginSolution margin_solution_from_json(const Json& j) {
  MarginSolution s;
  s.w = vector_from_json(field(j, "w"));
  if (j.contains("lambda")) s.lambda = vector_from_json(j.at("lambda"));
  if (j.contains("margins")) s.margins = vector_from_json(j.at("margins"));
  s.objective = j.value("objective", s.w.squaredNorm());
  s.iterations = j.value("iterations", std::size_t{0});
  s.converged = j.value("converged", false);
  return s;
}

Json to_json(const KktReport& r) {
  return {{"stationarity", r.stationarity},
          {"primal_feasibility", r.primal_feasibility},
          {"dual_feasibility", r.dual_feasibility},
          {"comp_slack", r.comp_slack},
          {"comp_slack_rel", r.comp_slack_rel},
          {"passes", r.passes}};
}

Json to_json(const TrainTrace& t) {
  Json pts = Json::array();
  for (const auto& p : t.points) {
    pts.push_back({{"step", p.step},
                   {"loss", p.loss},
                   {"log_loss", p.log_loss},
                   {"min_normalized_margin", p.min_normalized_margin},
                   {"cosine", p.cosine},
                   {"w_norm", p.w_norm}});
  }
  return {{"points", pts}, {"stop_reason", t.stop_reason}, {"steps", t.steps}, {"backtracks", t.backtracks}};
}

Json to_json(const KktCertificate& c) {
  return {{"lambda", vector_to_json(c.lambda)},
          {"stationarity_residual", c.stationarity_residual},
          {"feasibility_min", c.feasibility_min},
          {"comp_slack_max", c.comp_slack_max},
          {"tau", opt_number(c.tau)},
          {"kink_count", c.kink_count},
          {"min_abs_preactivation_ratio", c.min_abs_preactivation_ratio},
          {"nnls_converged", c.nnls_converged},
          {"passes", c.passes}};
}

Json to_json(const ErrorEstimate& e) {
  return {{"point_estimate", e.point_estimate},
          {"ci_low", e.ci_low},
          {"ci_high", e.ci_high},
          {"n_samples", e.n_samples},
          {"method", to_string(e.method)}};
}

Json to_json(const BoundValue& b) {
  return {{"value", b.value}, {"raw", b.raw}, {"constants_used", b.constants_used}, {"formula_id", to_string(b.formula_id)}};
}

Json to_json(const AgreementResult& a) {
  return {{"fraction", a.fraction}, {"compared", a.compared}, {"excluded", a.excluded}};
}

Json to_json(const OppDecomposition& o) {
  return {{"label_balance", o.label_balance},
          {"signal_norm", o.signal_norm},
          {"residual_norm", o.residual.norm()},
          {"train_min", o.train_min},
          {"test_max", o.test_max},
          {"test_draws", o.test_draws},
          {"d_over_n", o.d_over_n},
          {"test_scale", o.test_scale},
          {"train_ratio", o.train_ratio},
          {"test_ratio", o.test_ratio}};
}

Json network_to_json(const NetworkParams& p) {
  return {{"kind", "network"}, {"gamma", p.gamma()}, {"m", p.m()}, {"d", p.d()}, {"W", matrix_to_json(p.W())}};
}

NetworkParams network_from_json(const Json& j) {
  return NetworkParams(matrix_from_json(field(j, "W")), field(j, "gamma").get<double>());
}

Predictor predictor_from_json(const Json& j) {
  const std::string kind = j.value("kind", std::string("linear"));
  if (kind == "network") return network_from_json(j);
  if (kind == "linear") return vector_from_json(field(j, "w"));
  throw ValidationError("unknown predictor kind '" + kind + "'");
}

}  // namespace kktlab
