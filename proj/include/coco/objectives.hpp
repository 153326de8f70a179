#pragma once

#include "coco/dataset.hpp"
#include "coco/predictors.hpp"

#include <vector>

namespace coco {

// NaiveCoco is the weak penalty placed into the masked (thm-style) form,
// the ablation the linear benchmark compares against.
enum class Method { Erm, Coco, CocoModified, CocoErm, Irmv1, Vrex, NaiveCoco };

enum class Estimator { PopulationStyle, UnbiasedApprox1, BiasedApprox2 };

Method method_from_string(const std::string& s);
std::string to_string(Method m);

struct ObjectiveSpec {
    Method method = Method::Coco;
    double lambda_r = 0.0;    // risk weight in the risk-regularized objective
    double lambda = 0.0;      // IRMv1 penalty weight
    double lambda_w = 0.0;    // optional weak-penalty weight
    double lambda_vrex = 0.0; // variance-of-risks weight
    Estimator estimator = Estimator::PopulationStyle;
    // 0-based covariate indices known to be non-descendants (the set C).
    std::vector<Eigen::Index> nondescendant_mask;

    void validate() const;
};

// obj's own mask when present, else the dataset's known_nondescendants.
std::vector<Eigen::Index> effective_mask(const ObjectiveSpec& obj,
                                         const MultiEnvData& multi);

// Flat theta indices pinned to one by the mask: the covariate indices
// themselves for Linear/Logistic, the first-layer weights in the masked
// input columns for Mlp.
std::vector<Eigen::Index> mask_param_indices(const ModelShape& shape,
                                             const std::vector<Eigen::Index>& C);

// ||grad R ∘ theta||_2^2 on the full sample, over the full flattened
// parameter vector for every model kind.
double coco_penalty(const ModelParams& params, const EnvironmentDataset& data,
                    const RiskSpec& spec);

// Mini-batch estimator that is unbiased for the squared-mean penalty under
// resampling: sum_j theta_j^2 { mean(g_j^2) - sample-variance(g_j) }.
// Needs batch size >= 2.
double coco_penalty_unbiased(const ModelParams& params, const EnvironmentDataset& batch,
                             const RiskSpec& spec);

// Plug-in estimator sum_j theta_j^2 (mean g_j)^2; equals coco_penalty when
// the batch is the full dataset, and upper-bounds the unbiased estimator in
// expectation (Jensen).
double coco_penalty_biased(const ModelParams& params, const EnvironmentDataset& batch,
                           const RiskSpec& spec);

// ||grad R ∘ theta~||^2 with theta~ = 1 on the masked entries and theta
// elsewhere; removes the zero vector from the optima set.
double modified_penalty(const ModelParams& params, const EnvironmentDataset& data,
                        const RiskSpec& spec, const std::vector<Eigen::Index>& C);

// (<grad R, theta>)^2.
double weak_penalty(const ModelParams& params, const EnvironmentDataset& data,
                    const RiskSpec& spec);

// sum over blocks A of (<grad R_A, theta_A>)^2.  The finest partition
// reproduces coco_penalty, the coarsest reproduces weak_penalty.
double partition_penalty(const ModelParams& params, const EnvironmentDataset& data,
                         const RiskSpec& spec,
                         const std::vector<std::vector<Eigen::Index>>& partition);

// Squared derivative of the risk in a multiplicative output scale at 1.
// Computed from predictions directly, so the sample-level equality with
// weak_penalty for Linear+Squared and Logistic+CrossEntropy is a genuine
// cross-check of two independent code paths.
double irmv1_penalty(const ModelParams& params, const EnvironmentDataset& data,
                     const RiskSpec& spec);

// Full multi-environment objective for every method; see Method.
double total_objective(const ModelParams& params, const MultiEnvData& multi,
                       const RiskSpec& spec, const ObjectiveSpec& obj);

// Sufficient statistics of a Linear+Squared environment: W = X'X/n,
// b = X'y/n, yy = y'y/n.  risk = (yy - 2 a'b + a'W a)/2, grad = W a - b.
struct GramSummary {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
    double yy = 0.0;
    Eigen::Index n = 0;
};

GramSummary gram_summary(const EnvironmentDataset& data);

} // namespace coco
