#pragma once

#include <map>
#include <string>
#include <vector>

#include "kktlab/dataset.hpp"
#include "kktlab/types.hpp"

namespace kktlab {

enum class FormulaId { kSgTest, kClustTest };
std::string to_string(FormulaId f);

struct BoundValue {
  double value = 0.0;  // min(1, max(eta, raw))
  double raw = 0.0;
  std::map<std::string, double> constants_used;
  FormulaId formula_id = FormulaId::kSgTest;
};

/// eta + C' sqrt(r) (1 + sqrt(max(0, log(1/r) / 2))), r = tr(Sigma_{2:d}^2) / lambda_1^2.
BoundValue sg_test_bound(const Vector& lambda, double eta, double c_prime = 1.0);

/// eta + exp(-n min_q ||mu_q||^4 / (C' k^2 d)); means are the rows.
BoundValue clust_test_bound(const Matrix& means, std::size_t n, std::size_t k, std::size_t d,
                            double eta, double c_prime = 1.0);

/// ||[Sigma^{1/2} w]_{2:d}|| / (sqrt(lambda_1) w_1). Requires w_1 > 0.
double sg_alignment(const Vector& w, const Vector& lambda);

struct ClusterExponent {
  double exponent = 0.0;  // <w, mu_q>^2 / ||w||^2
  int sign = 1;           // sign of y_q <w, mu_q>, with sign(0) = +1
};

std::vector<ClusterExponent> cluster_margin_exponents(const Vector& w, const ClustSpec& spec);

double eta_limit_linear();
double eta_limit_leaky(double gamma);

}  // namespace kktlab
