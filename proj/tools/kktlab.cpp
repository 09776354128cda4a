// kktlab command-line driver.
//
// Exit codes: 0 ok, 1 unexpected error, 2 validation error, 3 infeasible
// problem or training failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "kktlab/dataset_io.hpp"
#include "kktlab/harness.hpp"
#include "kktlab/serialize.hpp"

namespace fs = std::filesystem;
using namespace kktlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config (JSON)");
  app->add_option("--seed", c.seed, "seed (overrides the config's seed list)");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--format", c.format, "report format")->check(CLI::IsMember({"csv", "json"}));
}

std::string cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

void flatten(const Json& j, const std::string& prefix, std::vector<std::pair<std::string, Json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) flatten(*it, key, out);
    else out.emplace_back(key, *it);
  }
}

// One CSV row per object; columns come from the first row.
std::string rows_csv(const std::vector<Json>& rows) {
  std::ostringstream os;
  std::vector<std::string> cols;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<std::pair<std::string, Json>> flat;
    flatten(rows[r], "", flat);
    if (r == 0) {
      os << "schema_version";
      for (const auto& [k, _] : flat) {
        cols.push_back(k);
        os << ',' << k;
      }
      os << '\n';
    }
    os << kSchemaVersion;
    for (const auto& k : cols) {
      const auto it = std::find_if(flat.begin(), flat.end(), [&](const auto& p) { return p.first == k; });
      os << ',' << (it == flat.end() ? "" : cell(it->second));
    }
    os << '\n';
  }
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write '" + path.string() + "'");
  os << text;
}

// Writes <out>/<stem>.<kind>.{csv,json}; `rows` is used for CSV, `doc` for JSON.
fs::path write_report(const Common& c, const std::string& stem, const std::string& kind, const Json& doc,
                      const std::vector<Json>& rows) {
  const std::string fmt = c.format.empty() ? "json" : c.format;
  const fs::path p = fs::path(c.out.empty() ? "out" : c.out) / (stem + "." + kind + "." + fmt);
  write_text(p, fmt == "json" ? doc.dump(2) + "\n" : rows_csv(rows));
  std::cout << p.string() << '\n';
  return p;
}

Json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open '" + path + "'");
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

std::optional<ExperimentConfig> maybe_config(const Common& c) {
  if (c.config.empty()) return std::nullopt;
  auto cfg = load_config(c.config);
  if (c.seed) cfg.seeds = {*c.seed};
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (!c.format.empty()) cfg.format = c.format;
  return cfg;
}

ExperimentConfig need_config(const Common& c) {
  auto cfg = maybe_config(c);
  if (!cfg) throw ValidationError("--config is required");
  return *cfg;
}

struct DataSource {
  Dataset data;
  std::string stem;
};

// Either --data PATH or a regenerated sample from --config at the first seed.
DataSource load_data(const Common& c, const std::string& data_path) {
  if (!data_path.empty()) return {read_dataset(data_path), fs::path(data_path).stem().string()};
  const auto cfg = need_config(c);
  const auto seed = cfg.seeds.front();
  return {sample(cfg.spec, cfg.n, seed), cfg.name + "_s" + std::to_string(seed)};
}

int cmd_gen(const Common& c, bool binary) {
  const auto cfg = need_config(c);
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  for (auto seed : cfg.seeds) {
    const Dataset ds = sample(cfg.spec, cfg.n, seed);
    const std::string stem = cfg.name + "_s" + std::to_string(seed);
    const fs::path p = dir / (stem + (binary ? ".kktd" : ".csv"));
    if (binary) write_dataset_binary(ds, p.string());
    else write_dataset_csv(ds, p.string());
    std::cout << p.string() << '\n';
    Json doc = {{"seed", seed}, {"n", ds.n()}, {"d", ds.d()}, {"noisy", ds.noisy_count()}};
    if (ds.n() >= 2) doc["profile"] = to_json(orthogonality_profile(ds));
    Common rc = c;
    rc.out = dir.string();
    write_report(rc, stem, "profile", doc, {doc});
  }
  return kExitOk;
}

int cmd_solve_linear(const Common& c, const std::string& data_path, std::optional<double> tol) {
  const auto src = load_data(c, data_path);
  LinearSolverOptions opts;
  if (auto cfg = maybe_config(c)) opts = cfg->solver;
  if (tol) opts.tol = *tol;
  const auto sol = solve_max_margin(src.data, opts);
  const auto kkt = verify_linear_kkt(sol, src.data, 1e-6);
  const fs::path dir = c.out.empty() ? "out" : c.out;
  const fs::path model = dir / (src.stem + ".linear.json");
  write_text(model, to_json(sol).dump(2) + "\n");
  std::cout << model.string() << '\n';

  Json summary = {{"n", src.data.n()},
                  {"d", src.data.d()},
                  {"iterations", sol.iterations},
                  {"objective", sol.objective},
                  {"norm_w", sol.w.norm()},
                  {"lambda_min", sol.lambda.minCoeff()},
                  {"lambda_max", sol.lambda.maxCoeff()},
                  {"kkt", to_json(kkt)}};
  if (sol.lambda.minCoeff() > 0) summary["tau"] = uniformity_ratio(sol.lambda);
  write_report(c, src.stem, "solve", summary, {summary});
  return kExitOk;
}

struct TrainFlags {
  std::optional<std::size_t> m;
  std::optional<double> gamma, init_scale;
  std::optional<std::size_t> max_steps;
};

int cmd_train_net(const Common& c, const std::string& data_path, const TrainFlags& f) {
  const auto src = load_data(c, data_path);
  ExperimentConfig cfg;
  if (auto loaded = maybe_config(c)) cfg = *loaded;
  if (f.m) cfg.m = *f.m;
  if (f.gamma) cfg.gamma = *f.gamma;
  if (f.init_scale) cfg.init_scale = *f.init_scale;
  if (f.max_steps) cfg.training.max_steps = *f.max_steps;
  const std::uint64_t seed = c.seed ? *c.seed : (cfg.seeds.empty() ? 0 : cfg.seeds.front());
  const auto init = init_network(cfg.m, src.data.d(), cfg.gamma, cfg.init_scale, seed);

  const fs::path dir = c.out.empty() ? "out" : c.out;
  auto emit = [&](const NetworkParams& p, const TrainTrace& t) {
    Json model = network_to_json(p);
    model["trace"] = to_json(t);
    const fs::path mp = dir / (src.stem + ".network.json");
    write_text(mp, model.dump(2) + "\n");
    std::cout << mp.string() << '\n';
    std::vector<Json> rows;
    for (const auto& pt : t.points) {
      rows.push_back({{"step", pt.step},
                      {"loss", pt.loss},
                      {"log_loss", pt.log_loss},
                      {"min_normalized_margin", pt.min_normalized_margin},
                      {"cosine", pt.cosine},
                      {"w_norm", pt.w_norm}});
    }
    write_report(c, src.stem, "trace", to_json(t), rows);
  };
  try {
    const auto res = train_to_margin(init, src.data, cfg.training);
    emit(res.params, res.trace);
  } catch (const TrainingFailureWithTrace& e) {
    emit(e.last(), e.trace());
    throw;
  }
  return kExitOk;
}

int cmd_certify(const Common& c, const std::string& data_path, const std::string& model_path,
                std::optional<double> tol_kink) {
  if (model_path.empty()) throw ValidationError("--model is required");
  const auto src = load_data(c, data_path);
  const NetworkParams net = network_from_json(read_json(model_path));
  CertifyOptions opts;
  if (auto cfg = maybe_config(c)) opts = cfg->certify;
  if (tol_kink) opts.tol_kink = *tol_kink;
  const auto cert = extract_net_kkt(net, src.data, opts);
  Json doc = to_json(cert);
  if (src.data.n() >= 2) {
    const auto prof = orthogonality_profile(src.data);
    doc["p_star"] = prof.p_star ? Json(*prof.p_star) : Json(nullptr);
    const double p = prof.p_star_or_inf();
    const double g = net.gamma();
    if (p >= 3.0 / (g * g * g)) {
      const auto b = lambda_bounds_leaky(prof, g, p);
      doc["lambda_lower_bound"] = b.lower;
      doc["lambda_upper_bound"] = b.upper;
      doc["tau_bound"] = tau_bound_leaky(p, prof.r_sq, g);
    }
  }
  Json row = doc;
  row.erase("lambda");
  row.erase("params");
  write_report(c, src.stem, "certificate", doc, {row});
  return kExitOk;
}

int cmd_eval(const Common& c, const std::string& model_path, const std::string& data_path,
             std::optional<std::size_t> n_test) {
  if (model_path.empty()) throw ValidationError("--model is required");
  const Predictor pred = predictor_from_json(read_json(model_path));
  const auto cfg = need_config(c);
  const std::uint64_t seed = cfg.seeds.front();
  const std::size_t N = n_test ? *n_test : cfg.eval.n_test;
  const auto est = test_error_mc(pred, cfg.spec, N, seed, cfg.eval.ci_level, cfg.eval.workers);
  Json doc = {{"seed", seed}, {"test_error", to_json(est)}};
  if (const auto* sg = std::get_if<SgSpec>(&cfg.spec)) {
    if (const auto* w = std::get_if<Vector>(&pred); w && sg->base_dist == BaseDist::kGaussian)
      doc["closed_form_error"] = test_error_exact_sg_gaussian(*w, *sg).point_estimate;
  }
  if (!data_path.empty()) {
    const auto ic = interpolation_check(pred, read_dataset(data_path));
    doc["train_errors"] = ic.train_errors;
    doc["interpolates"] = ic.interpolates;
  }
  const std::string stem = fs::path(model_path).stem().stem().string();
  write_report(c, stem, "eval", doc, {doc});
  return kExitOk;
}

int cmd_run(const Common& c) {
  const auto cfg = need_config(c);
  const auto recs = run_experiment(cfg);
  std::cout << write_records(cfg, recs) << '\n';
  for (const auto& r : recs) {
    if (r.status == "infeasible" || r.status == "training_failure") return kExitInfeasible;
    if (r.status == "invalid") return kExitValidation;
  }
  return kExitOk;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("bad sweep value '" + tok + "'");
    }
  }
  return out;
}

int cmd_sweep(const Common& c, const std::string& axis, const std::string& values) {
  if (c.config.empty()) throw ValidationError("--config is required");
  Json tmpl = read_json(c.config);
  if (c.seed) tmpl["seeds"] = Json::array({*c.seed});
  const auto res = sweep(tmpl, axis, parse_values(values));
  const auto cfg = parse_config(tmpl);
  Common rc = c;
  if (rc.out.empty()) rc.out = cfg.out_dir;
  if (rc.format.empty()) rc.format = cfg.format;
  const fs::path p = fs::path(rc.out) / (cfg.name + ".sweep_" + axis + "." + rc.format);
  write_text(p, rc.format == "json" ? sweep_to_json(res).dump(2) + "\n" : sweep_csv(res));
  std::cout << p.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kktlab: max-margin and leaky-ReLU network experiments"};
  app.require_subcommand(1);
  Common common;
  std::string data_path, model_path, axis, values;
  bool binary = false;
  std::optional<double> tol, tol_kink;
  std::optional<std::size_t> n_test;
  TrainFlags tf;

  auto* gen = app.add_subcommand("gen", "sample datasets for every seed of a config");
  add_common(gen, common);
  gen->add_flag("--binary", binary, "write .kktd binary instead of CSV");

  auto* solve = app.add_subcommand("solve-linear", "hard-margin linear solve with KKT report");
  add_common(solve, common);
  solve->add_option("--data", data_path, "dataset file (else sampled from --config)");
  solve->add_option("--tol", tol, "KKT tolerance");

  auto* train = app.add_subcommand("train-net", "train a leaky-ReLU network to large margin");
  add_common(train, common);
  train->add_option("--data", data_path, "dataset file (else sampled from --config)");
  train->add_option("-m,--width", tf.m, "hidden width (even)");
  train->add_option("--gamma", tf.gamma, "leaky slope in (0, 1]");
  train->add_option("--init-scale", tf.init_scale, "initial weight scale");
  train->add_option("--max-steps", tf.max_steps, "gradient step budget");

  auto* cert = app.add_subcommand("certify", "extract KKT multipliers for a trained network");
  add_common(cert, common);
  cert->add_option("--data", data_path, "dataset file (else sampled from --config)");
  cert->add_option("--model", model_path, "network JSON from train-net");
  cert->add_option("--tol-kink", tol_kink, "relative kink band");

  auto* ev = app.add_subcommand("eval", "Monte Carlo test error of a saved predictor");
  add_common(ev, common);
  ev->add_option("--model", model_path, "linear or network JSON");
  ev->add_option("--data", data_path, "training data for an interpolation check");
  ev->add_option("--n-test", n_test, "number of fresh draws");

  auto* run = app.add_subcommand("run", "run a full experiment config");
  add_common(run, common);

  auto* sw = app.add_subcommand("sweep", "run a config over values of one parameter");
  add_common(sw, common);
  sw->add_option("--axis", axis, "parameter name")->required();
  sw->add_option("--values", values, "comma-separated values")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen) return cmd_gen(common, binary);
    if (*solve) return cmd_solve_linear(common, data_path, tol);
    if (*train) return cmd_train_net(common, data_path, tf);
    if (*cert) return cmd_certify(common, data_path, model_path, tol_kink);
    if (*ev) return cmd_eval(common, model_path, data_path, n_test);
    if (*run) return cmd_run(common);
    if (*sw) return cmd_sweep(common, axis, values);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DegenerateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const TrainingFailure& e) {
    std::cerr << "training failed: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
