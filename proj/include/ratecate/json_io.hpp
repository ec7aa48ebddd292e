#pragma once
// JSON (de)serialization for fitted models and artifacts.

#include <string>

#include <json.hpp>

#include "ratecate/boosting.hpp"
#include "ratecate/contrast.hpp"
#include "ratecate/glm.hpp"
#include "ratecate/tworeg.hpp"
#include "ratecate/validate.hpp"

namespace ratecate {

using nlohmann::json;

json to_json(const PropensityModel& m);
json to_json(const PoissonGlmModel& m);
json to_json(const BoostedPoissonModel& m);
json to_json(const ContrastFit& fit);
json to_json(const TwoRegressionFit& fit);
json to_json(const ValidationCurve& curve);

PropensityModel propensity_from_json(const json& j);
PoissonGlmModel poisson_glm_from_json(const json& j);
BoostedPoissonModel boosted_from_json(const json& j);
ContrastFit contrast_fit_from_json(const json& j);
TwoRegressionFit two_regression_from_json(const json& j);

// Provenance header attached to every artifact.
json provenance(const json& config, std::uint64_t seed);

}  // namespace ratecate
