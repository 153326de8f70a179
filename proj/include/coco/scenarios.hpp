#pragma once

#include "coco/dataset.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace coco {

// The synthetic data-generating processes.  Case1..Case5 are linear-outcome
// SEMs with a descendant covariate z indexed by a per-environment scalar
// gamma; AppendixB1 is the four-covariate analytic example indexed by sigma;
// NonIdentifiable is the three-covariate family where two coefficient
// vectors are risk-optimal in every environment; Gmm is the mixture-model
// classification scenario indexed by the label-corruption probability p.
enum class ScenarioKind {
    Case1, Case2, Case3, Case4, Case5,
    AppendixB1, NonIdentifiable, Gmm,
};

ScenarioKind scenario_kind_from_string(const std::string& s);
std::string to_string(ScenarioKind kind);

struct SemScenario {
    ScenarioKind kind = ScenarioKind::Case5;
    // One entry per environment: gamma (cases), sigma (AppendixB1 and
    // NonIdentifiable use their own scalar), or corruption probability p
    // in [0,1] for Gmm.
    std::vector<double> env_params;
    Eigen::Index n_per_env = 10000;
    std::uint64_t seed = 0;
    int gmm_classes = 5; // K; z has ceil(K/2) columns

    void validate() const;
};

struct Generated {
    MultiEnvData multi;
    TrueCausalModel truth;
    // Per-environment constants drawn during generation (m's for Case1/4,
    // the Gmm u-vectors), plus scenario echo; serializable as-is.
    nlohmann::json meta() const;
    std::vector<std::vector<std::pair<std::string, double>>> env_constants;
    SemScenario scenario;
};

// Samples every environment of the scenario.  Deterministic: environment e
// draws from an independent child stream of the scenario seed, so results
// do not depend on generation order.
Generated generate(const SemScenario& scenario);

// Re-samples environment 0 of the scenario with the structural assignment
// of the target covariate (0-based column index in the dataset's covariate
// order) replaced by the constant `value`; downstream variables propagate.
// Supported for Case1..Case5 only.
EnvironmentDataset apply_do_intervention(const SemScenario& scenario,
                                         Eigen::Index target, double value);

// The known non-descendant set C for each scenario, as 0-based column indices:
// {x1} for the five cases, {x1,x2} for AppendixB1 and NonIdentifiable,
// all of x for Gmm.
std::vector<Eigen::Index> default_nondescendants(ScenarioKind kind, int gmm_classes = 5);

} // namespace coco
