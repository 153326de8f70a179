#include "coco/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coco {

namespace {

// theta with masked entries replaced by one.
Eigen::VectorXd masked_theta(const ModelParams& params,
                             const std::vector<Eigen::Index>& C) {
    Eigen::VectorXd t = params.theta;
    for (auto j : mask_param_indices(params.shape, C)) t(j) = 1.0;
    return t;
}

void check_mask(const std::vector<Eigen::Index>& C, Eigen::Index p) {
    if (C.empty()) throw std::invalid_argument("penalty mask: C must be non-empty");
    for (auto j : C)
        if (j < 0 || j >= p)
            throw std::invalid_argument("penalty mask: index out of range");
}

double risk_of(const ModelParams& params, const EnvironmentDataset& env,
               const RiskSpec& spec) {
    return empirical_risk(params, env, spec);
}

} // namespace

Method method_from_string(const std::string& s) {
    if (s == "erm") return Method::Erm;
    if (s == "coco") return Method::Coco;
    if (s == "coco-modified") return Method::CocoModified;
    if (s == "coco-erm") return Method::CocoErm;
    if (s == "irmv1" || s == "irm") return Method::Irmv1;
    if (s == "vrex" || s == "v-rex") return Method::Vrex;
    if (s == "naive-coco") return Method::NaiveCoco;
    throw std::invalid_argument("unknown method: " + s);
}

std::string to_string(Method m) {
    switch (m) {
        case Method::Erm: return "erm";
        case Method::Coco: return "coco";
        case Method::CocoModified: return "coco-modified";
        case Method::CocoErm: return "coco-erm";
        case Method::Irmv1: return "irmv1";
        case Method::Vrex: return "vrex";
        case Method::NaiveCoco: return "naive-coco";
    }
    throw std::logic_error("to_string: unknown method");
}

void ObjectiveSpec::validate() const {
    if (lambda_r < 0 || lambda < 0 || lambda_w < 0 || lambda_vrex < 0)
        throw std::invalid_argument("objective: weights must be >= 0");
}

std::vector<Eigen::Index> effective_mask(const ObjectiveSpec& obj,
                                         const MultiEnvData& multi) {
    return obj.nondescendant_mask.empty() ? multi.known_nondescendants
                                          : obj.nondescendant_mask;
}

std::vector<Eigen::Index> mask_param_indices(const ModelShape& shape,
                                             const std::vector<Eigen::Index>& C) {
    check_mask(C, shape.input);
    if (shape.kind != ModelKind::Mlp)
        return C;
    // Non-descendant knowledge attaches to input covariates, which enter an
    // Mlp only through first-layer columns.
    std::vector<Eigen::Index> idx;
    Eigen::Index first_width = shape.hidden.empty() ? shape.output : shape.hidden.front();
    for (Eigen::Index r = 0; r < first_width; ++r)
        for (auto c : C) idx.push_back(r * shape.input + c);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double coco_penalty(const ModelParams& params, const EnvironmentDataset& data,
                    const RiskSpec& spec) {
    Eigen::VectorXd g = risk_gradient(params, data, spec);
    return g.cwiseProduct(params.theta).squaredNorm();
}

double coco_penalty_unbiased(const ModelParams& params, const EnvironmentDataset& batch,
                             const RiskSpec& spec) {
    auto K = batch.n();
    if (K < 2)
        throw std::invalid_argument("coco_penalty_unbiased: batch size must be >= 2");
    Eigen::MatrixXd G = per_sample_gradients(params, batch, spec);
    double total = 0.0;
    double kd = static_cast<double>(K);
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
        double mean_sq = G.col(j).squaredNorm() / kd;
        double mean = G.col(j).mean();
        double var = (G.col(j).array() - mean).matrix().squaredNorm() / (kd - 1.0);
        double t = params.theta(j);
        total += t * t * (mean_sq - var);
    }
    return total;
}

double coco_penalty_biased(const ModelParams& params, const EnvironmentDataset& batch,
                           const RiskSpec& spec) {
    Eigen::MatrixXd G = per_sample_gradients(params, batch, spec);
    Eigen::VectorXd mean = G.colwise().mean();
    return mean.cwiseProduct(params.theta).squaredNorm();
}

double modified_penalty(const ModelParams& params, const EnvironmentDataset& data,
                        const RiskSpec& spec, const std::vector<Eigen::Index>& C) {
    Eigen::VectorXd g = risk_gradient(params, data, spec);
    return g.cwiseProduct(masked_theta(params, C)).squaredNorm();
}

double weak_penalty(const ModelParams& params, const EnvironmentDataset& data,
                    const RiskSpec& spec) {
    double s = risk_gradient(params, data, spec).dot(params.theta);
    return s * s;
}

double partition_penalty(const ModelParams& params, const EnvironmentDataset& data,
                         const RiskSpec& spec,
                         const std::vector<std::vector<Eigen::Index>>& partition) {
    Eigen::Index dim = params.theta.size();
    std::vector<char> seen(static_cast<std::size_t>(dim), 0);
    for (const auto& block : partition)
        for (auto j : block) {
            if (j < 0 || j >= dim)
                throw std::invalid_argument("partition_penalty: index out of range");
            if (seen[static_cast<std::size_t>(j)]++)
                throw std::invalid_argument("partition_penalty: overlapping blocks");
        }
    for (char s : seen)
        if (!s) throw std::invalid_argument("partition_penalty: incomplete partition");
    Eigen::VectorXd g = risk_gradient(params, data, spec);
    double total = 0.0;
    for (const auto& block : partition) {
        double s = 0.0;
        for (auto j : block) s += g(j) * params.theta(j);
        total += s * s;
    }
    return total;
}

double irmv1_penalty(const ModelParams& params, const EnvironmentDataset& data,
                     const RiskSpec& spec) {
    auto n = static_cast<double>(data.n());
    double s = 0.0;
    switch (params.shape.kind) {
        case ModelKind::Linear: {
            // d/dw (1/n) sum 1/2 (w yhat - y)^2 at w=1.
            Eigen::VectorXd yhat = predict(params, data.X).col(0);
            s = yhat.cwiseProduct(yhat - data.y).sum() / n;
            break;
        }
        case ModelKind::Logistic: {
            // Scale multiplies the raw score; differentiate the loss of
            // sigmoid(w x'a) in w at w=1.
            Eigen::VectorXd score = data.X * params.theta;
            Eigen::VectorXd phat = predict(params, data.X).col(0);
            if (spec.loss == Loss::CrossEntropy) {
                s = score.cwiseProduct(phat - data.y).sum() / n;
            } else {
                Eigen::VectorXd sig_prime =
                    phat.cwiseProduct(Eigen::VectorXd::Ones(phat.size()) - phat);
                s = score.cwiseProduct(sig_prime)
                        .cwiseProduct(phat - data.y).sum() / n;
            }
            break;
        }
        case ModelKind::Mlp: {
            Eigen::MatrixXd f = predict(params, data.X);
            if (spec.loss == Loss::Squared) {
                s = (f.col(0).cwiseProduct(f.col(0) - data.y)).sum() / n;
            } else {
                // d/dw softmax-CE of w f at w=1: mean <p - onehot(y), f>.
                Eigen::MatrixXd P = (f.colwise() - f.rowwise().maxCoeff()).array().exp();
                P = P.array().colwise() / P.rowwise().sum().array();
                for (Eigen::Index i = 0; i < data.n(); ++i) {
                    auto label = static_cast<Eigen::Index>(std::lround(data.y(i)));
                    if (label < 0 || label >= f.cols())
                        throw std::invalid_argument("irmv1_penalty: label out of range");
                    s += P.row(i).dot(f.row(i)) - f(i, label);
                }
                s /= n;
            }
            break;
        }
    }
    return s * s;
}

double total_objective(const ModelParams& params, const MultiEnvData& multi,
                       const RiskSpec& spec, const ObjectiveSpec& obj) {
    obj.validate();
    auto m = static_cast<double>(multi.environments.size());
    auto mask = effective_mask(obj, multi);
    if ((obj.method == Method::CocoModified || obj.method == Method::NaiveCoco) &&
        mask.empty())
        throw std::invalid_argument(
            to_string(obj.method) +
            " needs non-descendant indices, from the objective or the dataset");
    double total = 0.0;
    switch (obj.method) {
        case Method::Erm: {
            for (const auto& env : multi.environments) total += risk_of(params, env, spec);
            return total / m;
        }
        case Method::Coco: {
            for (const auto& env : multi.environments) {
                switch (obj.estimator) {
                    case Estimator::PopulationStyle:
                        total += coco_penalty(params, env, spec);
                        break;
                    case Estimator::UnbiasedApprox1:
                        total += coco_penalty_unbiased(params, env, spec);
                        break;
                    case Estimator::BiasedApprox2:
                        total += coco_penalty_biased(params, env, spec);
                        break;
                }
            }
            return total / m;
        }
        case Method::CocoModified: {
            for (const auto& env : multi.environments) {
                total += modified_penalty(params, env, spec, mask);
                if (obj.lambda_w > 0) total += obj.lambda_w * weak_penalty(params, env, spec);
            }
            return total / m;
        }
        case Method::CocoErm: {
            for (const auto& env : multi.environments) {
                total += coco_penalty(params, env, spec);
                if (obj.lambda_w > 0) total += obj.lambda_w * weak_penalty(params, env, spec);
                total += obj.lambda_r * risk_of(params, env, spec);
            }
            return total / m;
        }
        case Method::Irmv1: {
            // Sums environments, as the baseline objective does.
            for (const auto& env : multi.environments)
                total += risk_of(params, env, spec) +
                         obj.lambda * irmv1_penalty(params, env, spec);
            return total;
        }
        case Method::Vrex: {
            Eigen::VectorXd risks(multi.environments.size());
            for (std::size_t e = 0; e < multi.environments.size(); ++e)
                risks(static_cast<Eigen::Index>(e)) =
                    risk_of(params, multi.environments[e], spec);
            double mean = risks.mean();
            double var = multi.environments.size() < 2
                ? 0.0
                : (risks.array() - mean).matrix().squaredNorm() / (m - 1.0);
            return mean + obj.lambda_vrex * var;
        }
        case Method::NaiveCoco: {
            for (const auto& env : multi.environments) {
                Eigen::VectorXd g = risk_gradient(params, env, spec);
                double s = g.dot(masked_theta(params, mask));
                total += s * s;
            }
            return total / m;
        }
    }
    throw std::logic_error("total_objective: unknown method");
}

GramSummary gram_summary(const EnvironmentDataset& data) {
    GramSummary g;
    auto n = static_cast<double>(data.n());
    g.W = data.X.transpose() * data.X / n;
    g.b = data.X.transpose() * data.y / n;
    g.yy = data.y.squaredNorm() / n;
    g.n = data.n();
    return g;
}

} // namespace coco
