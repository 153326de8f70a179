#pragma once

#include "coco/objectives.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace coco {

// Multiplies lambda_r by decay_factor on every iteration past
// trigger_fraction * max_iters on which ||theta|| > escape_norm, clamping
// values below 1e-12 to zero.  escape_norm == 0 means the scale-aware
// default 0.1 * sqrt(param_count).
struct AnnealSchedule {
    bool enabled = false;
    double trigger_fraction = 0.5;
    double escape_norm = 0.0;
    double decay_factor = 0.9;
};

// Analytic: closed forms assembled from per-environment Gram matrices,
// Linear + Squared only.  FiniteDifference: central differences of the full
// objective, any model.  GradientDifference: exact risk gradients plus
// Hessian-vector products by differencing the risk gradient; exact for
// Erm/Vrex/Irmv1, O(fd_step^2) truncation error for the Hadamard penalties.
enum class OuterGrad { Analytic, FiniteDifference, GradientDifference };

enum class InitKind { ZeroPlusJitter, GivenVector };

struct OptimConfig {
    double step_size = 0.1;
    long max_iters = 1000;
    double tol = 1e-8; // stop when the objective-gradient norm drops below
    AnnealSchedule anneal;
    OuterGrad outer_grad = OuterGrad::Analytic;
    double fd_step = 1e-4;
    InitKind init = InitKind::ZeroPlusJitter;
    double init_jitter_sd = 0.01; // per-coordinate sd for ZeroPlusJitter
    Eigen::VectorXd init_vector;  // used when init == GivenVector
    std::uint64_t seed = 0;

    void validate() const;
};

struct FitResult {
    ModelParams params; // iterate with the lowest recorded objective
    std::vector<std::pair<long, double>> objective_trace;
    bool converged = false;
    double final_gradient_norm = 0.0;
    std::string diagnostic; // empty on clean convergence
};

// Gradient descent on total_objective with backtracking halving on increase
// (step restored after 10 clean steps), the anneal schedule above, and
// divergence detection (objective above 1e12 or non-finite).
FitResult fit(const MultiEnvData& multi, const RiskSpec& risk, const ObjectiveSpec& obj,
              const OptimConfig& cfg, const ModelShape& shape);

// Gradient of total_objective with respect to the flat parameter vector,
// computed per cfg.outer_grad.  Rejects pure Erm (no penalty to
// differentiate); fit handles Erm internally.
Eigen::VectorXd outer_gradient(const ModelParams& params, const MultiEnvData& multi,
                               const RiskSpec& risk, const ObjectiveSpec& obj,
                               const OptimConfig& cfg);

// Normal-equation solutions.  Both reject Gram matrices with condition
// number at or above 1e12.
ModelParams fit_ols_closed_form(const EnvironmentDataset& data);
ModelParams fit_ols_closed_form(const MultiEnvData& multi); // pooled sample

} // namespace coco
