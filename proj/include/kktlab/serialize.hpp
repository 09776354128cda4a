#pragma once

#include <json.hpp>

#include "kktlab/bounds.hpp"
#include "kktlab/dataset.hpp"
#include "kktlab/eval.hpp"
#include "kktlab/geometry.hpp"
#include "kktlab/leaky_net.hpp"
#include "kktlab/linear_maxmargin.hpp"

namespace kktlab {

using Json = nlohmann::json;

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);
Json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const Json& j);

Json to_json(const DistributionSpec& spec);
/// Accepts the explicit forms ("sg", "clust", "opp").
DistributionSpec spec_from_json(const Json& j);

Json to_json(const OrthogonalityProfile& p);
Json to_json(const AssumptionReport& r);
Json to_json(const MarginSolution& s);
MarginSolution margin_solution_from_json(const Json& j);
Json to_json(const KktReport& r);
Json to_json(const TrainTrace& t);
Json to_json(const KktCertificate& c);
Json to_json(const ErrorEstimate& e);
Json to_json(const BoundValue& b);
Json to_json(const AgreementResult& a);
Json to_json(const OppDecomposition& o);

/// {"kind": "network", "gamma", "W"}; a is implied by m.
Json network_to_json(const NetworkParams& p);
NetworkParams network_from_json(const Json& j);

/// Reads either a network file or a linear solution file (uses "w").
Predictor predictor_from_json(const Json& j);

}  // namespace kktlab
