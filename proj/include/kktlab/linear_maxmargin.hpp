#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "kktlab/dataset.hpp"
#include "kktlab/errors.hpp"
#include "kktlab/geometry.hpp"
#include "kktlab/types.hpp"

namespace kktlab {

struct MarginSolution {
  Vector w;
  Vector lambda;
  Vector margins;  // y_i <w, x_i>
  double objective = 0.0;  // ||w||^2
  std::size_t iterations = 0;  // coordinate sweeps
  bool converged = false;
  std::vector<double> dual_history;  // dual objective after each sweep
};

/// Carries the last iterate of a diverging or stalled dual ascent.
class InfeasibleSolve : public InfeasibleError {
 public:
  InfeasibleSolve(const std::string& what, MarginSolution best)
      : InfeasibleError(what), best_(std::move(best)) {}
  const MarginSolution& best() const { return best_; }

 private:
  MarginSolution best_;
};

struct LinearSolverOptions {
  double tol = 1e-8;
  std::size_t max_iter = 100000;  // sweeps
  double lambda_cap_factor = 1e8;  // cap = factor / min ||x_i||^2
  std::size_t polish_every = 25;  // sweeps between active-set solves; 0 disables
};

/// Hard-margin bias-free max margin by cyclic dual coordinate ascent.
/// Convergence is declared on the projected-gradient KKT residual.
MarginSolution solve_max_margin(const Dataset& data, const LinearSolverOptions& opts = {});
MarginSolution solve_max_margin(const Dataset& data, double tol, std::size_t max_iter);

struct KktReport {
  double stationarity = 0.0;  // ||w - sum lambda_i y_i x_i|| / ||w||
  double primal_feasibility = 0.0;  // min_i margin_i - 1
  double dual_feasibility = 0.0;  // min_i lambda_i
  double comp_slack = 0.0;  // max_i lambda_i |margin_i - 1|
  double comp_slack_rel = 0.0;  // same with lambda scaled by max lambda
  bool passes = false;
};

/// Margins are recomputed from sol.w; the comp-slack test uses the relative
/// form so the verdict does not depend on the scale of the data.
KktReport verify_linear_kkt(const MarginSolution& sol, const Dataset& data, double tol);

double tau_bound_linear(double p, double r_sq);

struct LambdaBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// p may be +inf.
LambdaBounds lambda_bounds_linear(const OrthogonalityProfile& profile, double p);

/// Enumerates supports; n <= 12.
MarginSolution brute_force_max_margin(const Dataset& data);

}  // namespace kktlab
