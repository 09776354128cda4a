#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kktlab/dataset.hpp"
#include "kktlab/leaky_net.hpp"
#include "kktlab/linear_maxmargin.hpp"
#include "kktlab/serialize.hpp"

namespace kktlab {

inline constexpr int kSchemaVersion = 1;

enum class ModelKind { kLinear, kLeakyNet };
std::string to_string(ModelKind k);

struct EvalConfig {
  std::size_t n_test = 10000;
  double ci_level = 0.99;
  std::size_t probe_count = 10000;
  double exclusion_band = 1e-3;
  bool probes_from_distribution = true;  // else isotropic N(0, I)
  unsigned workers = 1;
};

struct BoundConstants {
  double C = 2.0;
  double delta = 0.1;
  double c_prime = 1.0;
  std::optional<double> Delta;  // required for cluster experiments
  double c = 1.0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Json source;  // the JSON this config was parsed from, echoed into outputs
  DistributionSpec spec;
  std::size_t n = 0;
  std::vector<std::uint64_t> seeds;
  ModelKind model = ModelKind::kLinear;
  std::size_t m = 32;
  double gamma = 0.5;
  double init_scale = 1e-6;
  LinearSolverOptions solver;
  TrainConfig training;
  CertifyOptions certify;
  EvalConfig eval;
  BoundConstants constants;
  std::string out_dir = "out";
  std::string format = "csv";
  unsigned seed_workers = 1;

  void validate() const;
};

/// Parses the JSON config format documented in the README. Throws
/// ValidationError on unknown keys or out-of-range values.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::string& path);

/// Builds just the distribution from a "distribution" JSON block (shorthand
/// types "gaus", "sg", "clust", "opp").
DistributionSpec build_distribution(const Json& j);

struct RunRecord {
  std::string experiment;
  ModelKind model = ModelKind::kLinear;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t d = 0;
  double eta = 0.0;
  std::string status = "ok";  // ok | infeasible | training_failure | degenerate | invalid
  std::string error;

  std::optional<OrthogonalityProfile> profile;
  std::optional<bool> assumptions_ok;
  Json assumptions;
  std::optional<std::size_t> train_errors;
  std::optional<bool> interpolates;
  std::optional<double> lambda_min, lambda_max;
  std::optional<double> lambda_lower_bound, lambda_upper_bound;
  std::optional<bool> sandwich_ok;
  std::optional<double> tau_measured, tau_bound;
  std::optional<double> kkt_residual;
  std::optional<bool> kkt_passes;
  std::optional<ErrorEstimate> test_error;
  std::optional<double> closed_form_error;
  std::optional<BoundValue> bound;
  std::optional<bool> eta_hypothesis_ok;

  // network runs only
  std::size_t m = 0;
  double gamma = 0.0;
  std::optional<std::size_t> train_steps;
  std::string stop_reason;
  std::optional<double> final_log_loss;
  std::optional<double> min_normalized_margin;
  std::optional<std::size_t> kink_count;
  std::optional<AgreementResult> agreement;

  double wall_clock_s = 0.0;
};

RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed);
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

std::vector<std::string> record_columns(ModelKind model);
std::vector<std::string> record_row(const RunRecord& r);
Json record_to_json(const RunRecord& r);

/// CSV text for the records (header + one row per record).
std::string records_csv(const std::vector<RunRecord>& records, ModelKind model);

/// Writes <out_dir>/<name>.csv (plus <name>.config.json) or <name>.json.
/// Returns the path of the main file.
std::string write_records(const ExperimentConfig& cfg, const std::vector<RunRecord>& records);

struct SweepRow {
  std::string axis;
  double value = 0.0;
  std::size_t seeds = 0;
  std::size_t ok = 0;
  double interpolation_rate = 0.0;
  std::optional<double> test_error_mean, test_error_ci_low, test_error_ci_high;
  std::optional<double> bound_mean;
  std::optional<double> p_star_mean;
  std::optional<double> tau_measured_mean;
  std::optional<double> agreement_mean;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::vector<RunRecord>> runs;
};

inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes = {"d",     "n", "eta",      "rho",       "gamma",
                                                "m",     "mu_norm", "mean_norm", "init_scale", "k"};
  return axes;
}

/// Patches the named field of the template for each value and runs it.
SweepResult sweep(const Json& cfg_template, const std::string& axis, const std::vector<double>& values);
std::vector<std::string> sweep_columns();
std::string sweep_csv(const SweepResult& s);
Json sweep_to_json(const SweepResult& s);

}  // namespace kktlab
