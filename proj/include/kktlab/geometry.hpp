#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kktlab/dataset.hpp"
#include "kktlab/types.hpp"

namespace kktlab {

struct OrthogonalityProfile {
  double r_min_sq = 0.0;
  double r_max_sq = 0.0;
  double r_sq = 1.0;
  double zeta = 0.0;
  std::optional<double> p_star;  // empty means +inf (zeta == 0)

  double p_star_or_inf() const;
  bool is_p_orthogonal(double p) const;
};

/// Exact profile from the full Gram matrix. Needs n >= 2.
OrthogonalityProfile orthogonality_profile(const Matrix& X);
OrthogonalityProfile orthogonality_profile(const Dataset& data);

/// max s / min s; throws if any entry is not strictly positive.
double uniformity_ratio(const Vector& s);

/// ||w - sum s_i y_i x_i|| <= tol ||w|| and s > 0.
bool check_tau_uniform(const Vector& w, const Dataset& data, const Vector& s, double tol);

double stable_rank(const Vector& eigenvalues);
double effective_rank_ratio(const Vector& eigenvalues);

struct AssumptionEntry {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
  double margin_ratio = 0.0;  // lhs / rhs
};

struct AssumptionReport {
  std::vector<AssumptionEntry> entries;
  bool all_satisfied() const;
};

/// SG1-SG3 with natural logs.
AssumptionReport sg_assumption_report(const SgSpec& spec, std::size_t n, double delta, double C);
/// CL1-CL4 with natural logs.
AssumptionReport clust_assumption_report(const ClustSpec& spec, std::size_t n, double delta,
                                         double C);

}  // namespace kktlab
