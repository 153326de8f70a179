#pragma once

#include "coco/dataset.hpp"

#include <vector>

namespace coco {

enum class ModelKind { Linear, Logistic, Mlp };

// Tanh is the default everywhere (smooth, so finite-difference oracles
// apply); Relu is available behind this switch; Identity exists for
// composition tests.
enum class Activation { Tanh, Relu, Identity };

struct ModelShape {
    ModelKind kind = ModelKind::Linear;
    Eigen::Index input = 0;
    std::vector<Eigen::Index> hidden; // empty unless kind == Mlp
    Eigen::Index output = 1;
    Activation activation = Activation::Tanh;

    // Layer widths including input and output, e.g. (8, 16, 16, 5).
    std::vector<Eigen::Index> layer_dims() const;
    Eigen::Index param_count() const;
    void validate() const;

    static ModelShape linear(Eigen::Index p) { return {ModelKind::Linear, p, {}, 1}; }
    static ModelShape logistic(Eigen::Index p) { return {ModelKind::Logistic, p, {}, 1}; }
    static ModelShape mlp(Eigen::Index p, std::vector<Eigen::Index> hidden,
                          Eigen::Index classes, Activation act = Activation::Tanh) {
        return {ModelKind::Mlp, p, std::move(hidden), classes, act};
    }
};

// theta is the flat parameter vector: the coefficient vector for
// Linear/Logistic; for Mlp the weight matrices in layer order, each stored
// row-major as (next_width x prev_width).  No bias terms: intercepts are
// absorbed into the covariates, and none of the scenarios use one.
struct ModelParams {
    ModelShape shape;
    Eigen::VectorXd theta;
    void validate() const;
};

enum class Loss { Squared, CrossEntropy };

struct RiskSpec {
    Loss loss = Loss::Squared;
};

// Linear: X alpha.  Logistic: sigmoid(X alpha).  Mlp: raw network outputs
// (logits for classification; softmax is applied inside the risk).
Eigen::MatrixXd predict(const ModelParams& params, const Eigen::MatrixXd& X);

// Squared: (1/n) sum (1/2)(yhat_i - y_i)^2.  CrossEntropy: binary for
// Logistic, softmax negative log-likelihood for Mlp with labels 0..k-1.
// Probabilities are clamped to [1e-12, 1-1e-12] before any log.
double empirical_risk(const ModelParams& params, const EnvironmentDataset& data,
                      const RiskSpec& spec);

// Exact analytic gradient of empirical_risk with respect to theta.
Eigen::VectorXd risk_gradient(const ModelParams& params, const EnvironmentDataset& data,
                              const RiskSpec& spec);

// Row i is the gradient of the loss at sample i; the row mean equals
// risk_gradient exactly.
Eigen::MatrixXd per_sample_gradients(const ModelParams& params,
                                     const EnvironmentDataset& data,
                                     const RiskSpec& spec);

// Central finite differences of empirical_risk, coordinate by coordinate.
// Test oracle; O(|theta|) risk evaluations.
Eigen::VectorXd risk_gradient_fd(const ModelParams& params, const EnvironmentDataset& data,
                                 const RiskSpec& spec, double step);

// Gradient of (1/n) sum_i <D_i, f_i(theta)> where f is the raw model output
// and D is n x k.  Building block for risk gradients and for the scalar
// output-scale derivative used by the IRMv1 penalty.
Eigen::VectorXd output_weighted_gradient(const ModelParams& params,
                                         const Eigen::MatrixXd& X,
                                         const Eigen::MatrixXd& D);

// Mean classification accuracy in [0,1]: argmax of outputs vs integer labels
// (Mlp), or thresholded probability (Logistic).
double accuracy(const ModelParams& params, const EnvironmentDataset& data);

} // namespace coco
