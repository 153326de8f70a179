#include "coco/predictors.hpp"

#include <cmath>
#include <stdexcept>

namespace coco {

namespace {

constexpr double kProbFloor = 1e-12;

double clamp_prob(double p) {
    return std::min(1.0 - kProbFloor, std::max(kProbFloor, p));
}

double apply_act(Activation act, double v) {
    switch (act) {
        case Activation::Tanh: return std::tanh(v);
        case Activation::Relu: return v > 0.0 ? v : 0.0;
        case Activation::Identity: return v;
    }
    throw std::logic_error("unknown activation");
}

// Derivative expressed through the post-activation value.
double act_deriv(Activation act, double a) {
    switch (act) {
        case Activation::Tanh: return 1.0 - a * a;
        case Activation::Relu: return a > 0.0 ? 1.0 : 0.0;
        case Activation::Identity: return 1.0;
    }
    throw std::logic_error("unknown activation");
}

// Weight matrices as Eigen maps into the flat theta (layer-major,
// row-major, each W_l is next_width x prev_width).
std::vector<Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                           Eigen::RowMajor>>>
weight_views(const ModelShape& shape, const Eigen::VectorXd& theta) {
    auto dims = shape.layer_dims();
    std::vector<Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>>> views;
    Eigen::Index off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        views.emplace_back(theta.data() + off, dims[l + 1], dims[l]);
        off += dims[l + 1] * dims[l];
    }
    return views;
}

struct Forward {
    std::vector<Eigen::MatrixXd> activations; // activations[0] = X
    Eigen::MatrixXd outputs;                  // n x k, pre-softmax
};

Forward mlp_forward(const ModelParams& params, const Eigen::MatrixXd& X) {
    auto Ws = weight_views(params.shape, params.theta);
    Forward fw;
    fw.activations.push_back(X);
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l + 1 < Ws.size(); ++l) {
        a = (a * Ws[l].transpose()).unaryExpr([&](double v) {
            return apply_act(params.shape.activation, v);
        });
        fw.activations.push_back(a);
    }
    fw.outputs = a * Ws.back().transpose();
    return fw;
}

// Gradient of sum_i <D_i, f_i> (no 1/n; callers fold scaling into D).
Eigen::VectorXd mlp_backprop(const ModelParams& params, const Forward& fw,
                             Eigen::MatrixXd delta) {
    auto Ws = weight_views(params.shape, params.theta);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.theta.size());
    auto dims = params.shape.layer_dims();
    std::vector<Eigen::Index> offsets(Ws.size());
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < Ws.size(); ++l) {
        offsets[l] = off;
        off += dims[l + 1] * dims[l];
    }
    for (std::size_t l = Ws.size(); l-- > 0;) {
        Eigen::MatrixXd gW = delta.transpose() * fw.activations[l];
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            grad.data() + offsets[l], gW.rows(), gW.cols()) = gW;
        if (l > 0) {
            delta = (delta * Ws[l]).cwiseProduct(fw.activations[l].unaryExpr([&](double a) {
                return act_deriv(params.shape.activation, a);
            }));
        }
    }
    return grad;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& F) {
    Eigen::MatrixXd P = (F.colwise() - F.rowwise().maxCoeff()).array().exp();
    return P.array().colwise() / P.rowwise().sum().array();
}

Eigen::MatrixXd onehot(const Eigen::VectorXd& y, Eigen::Index k) {
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(y.size(), k);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        auto label = static_cast<Eigen::Index>(std::lround(y(i)));
        if (label < 0 || label >= k)
            throw std::invalid_argument("labels must be integers in [0, classes)");
        Y(i, label) = 1.0;
    }
    return Y;
}

void check_risk_combo(const ModelParams& params, const RiskSpec& spec) {
    if (spec.loss == Loss::CrossEntropy && params.shape.kind == ModelKind::Linear)
        throw std::invalid_argument("cross-entropy needs a Logistic or Mlp predictor");
    if (spec.loss == Loss::Squared && params.shape.kind == ModelKind::Mlp &&
        params.shape.output != 1)
        throw std::invalid_argument("squared loss needs a single real output");
}

} // namespace

std::vector<Eigen::Index> ModelShape::layer_dims() const {
    std::vector<Eigen::Index> dims;
    dims.push_back(input);
    for (auto h : hidden) dims.push_back(h);
    dims.push_back(output);
    return dims;
}

Eigen::Index ModelShape::param_count() const {
    if (kind != ModelKind::Mlp) return input;
    auto dims = layer_dims();
    Eigen::Index count = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) count += dims[l] * dims[l + 1];
    return count;
}

void ModelShape::validate() const {
    if (input < 1) throw std::invalid_argument("model shape: input dim must be >= 1");
    if (kind != ModelKind::Mlp) {
        if (!hidden.empty())
            throw std::invalid_argument("model shape: hidden layers need kind Mlp");
        if (output != 1)
            throw std::invalid_argument("model shape: Linear/Logistic output dim is 1");
        return;
    }
    if (output < 1) throw std::invalid_argument("model shape: output dim must be >= 1");
    for (auto h : hidden)
        if (h < 1) throw std::invalid_argument("model shape: hidden width must be >= 1");
}

void ModelParams::validate() const {
    shape.validate();
    if (theta.size() != shape.param_count())
        throw std::invalid_argument("model params: theta length does not match shape");
    if (!theta.allFinite())
        throw std::invalid_argument("model params: non-finite parameter");
}

Eigen::MatrixXd predict(const ModelParams& params, const Eigen::MatrixXd& X) {
    params.validate();
    if (X.cols() != params.shape.input)
        throw std::invalid_argument("predict: X columns do not match model input");
    switch (params.shape.kind) {
        case ModelKind::Linear:
            return X * params.theta;
        case ModelKind::Logistic:
            return (X * params.theta).unaryExpr(
                [](double t) { return 1.0 / (1.0 + std::exp(-t)); });
        case ModelKind::Mlp:
            return mlp_forward(params, X).outputs;
    }
    throw std::logic_error("predict: unknown model kind");
}

double empirical_risk(const ModelParams& params, const EnvironmentDataset& data,
                      const RiskSpec& spec) {
    check_risk_combo(params, spec);
    auto n = data.n();
    if (spec.loss == Loss::Squared) {
        Eigen::VectorXd yhat = predict(params, data.X).col(0);
        return 0.5 * (yhat - data.y).squaredNorm() / static_cast<double>(n);
    }
    if (params.shape.kind == ModelKind::Logistic) {
        Eigen::VectorXd phat = predict(params, data.X).col(0);
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double p = clamp_prob(phat(i));
            total -= data.y(i) * std::log(p) + (1.0 - data.y(i)) * std::log(1.0 - p);
        }
        return total / static_cast<double>(n);
    }
    Eigen::MatrixXd P = softmax_rows(mlp_forward(params, data.X).outputs);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto label = static_cast<Eigen::Index>(std::lround(data.y(i)));
        if (label < 0 || label >= P.cols())
            throw std::invalid_argument("labels must be integers in [0, classes)");
        total -= std::log(clamp_prob(P(i, label)));
    }
    return total / static_cast<double>(n);
}

Eigen::VectorXd risk_gradient(const ModelParams& params, const EnvironmentDataset& data,
                              const RiskSpec& spec) {
    check_risk_combo(params, spec);
    auto n = static_cast<double>(data.n());
    switch (params.shape.kind) {
        case ModelKind::Linear:
            return data.X.transpose() * (data.X * params.theta - data.y) / n;
        case ModelKind::Logistic: {
            Eigen::VectorXd phat = predict(params, data.X).col(0);
            if (spec.loss == Loss::CrossEntropy)
                return data.X.transpose() * (phat - data.y) / n;
            Eigen::VectorXd w =
                (phat - data.y).cwiseProduct(phat.cwiseProduct((1.0 - phat.array()).matrix()));
            return data.X.transpose() * w / n;
        }
        case ModelKind::Mlp: {
            Forward fw = mlp_forward(params, data.X);
            Eigen::MatrixXd delta;
            if (spec.loss == Loss::Squared) {
                delta = (fw.outputs.col(0) - data.y) / n;
            } else {
                delta = (softmax_rows(fw.outputs) - onehot(data.y, fw.outputs.cols())) / n;
            }
            return mlp_backprop(params, fw, std::move(delta));
        }
    }
    throw std::logic_error("risk_gradient: unknown model kind");
}

Eigen::MatrixXd per_sample_gradients(const ModelParams& params,
                                     const EnvironmentDataset& data,
                                     const RiskSpec& spec) {
    check_risk_combo(params, spec);
    auto n = data.n();
    Eigen::MatrixXd G(n, params.theta.size());
    switch (params.shape.kind) {
        case ModelKind::Linear: {
            Eigen::VectorXd resid = data.X * params.theta - data.y;
            G = data.X.array().colwise() * resid.array();
            return G;
        }
        case ModelKind::Logistic: {
            Eigen::VectorXd phat = predict(params, data.X).col(0);
            Eigen::VectorXd w = spec.loss == Loss::CrossEntropy
                ? (phat - data.y).eval()
                : (phat - data.y)
                      .cwiseProduct(phat.cwiseProduct((1.0 - phat.array()).matrix()))
                      .eval();
            G = data.X.array().colwise() * w.array();
            return G;
        }
        case ModelKind::Mlp: {
            // Per-sample backprop; used by the mini-batch estimators where
            // n stays small.
            for (Eigen::Index i = 0; i < n; ++i) {
                Forward fw = mlp_forward(params, data.X.row(i));
                Eigen::MatrixXd delta;
                if (spec.loss == Loss::Squared) {
                    delta = fw.outputs;
                    delta(0, 0) -= data.y(i);
                } else {
                    delta = softmax_rows(fw.outputs) -
                            onehot(data.y.segment(i, 1), fw.outputs.cols());
                }
                G.row(i) = mlp_backprop(params, fw, std::move(delta)).transpose();
            }
            return G;
        }
    }
    throw std::logic_error("per_sample_gradients: unknown model kind");
}

Eigen::VectorXd risk_gradient_fd(const ModelParams& params, const EnvironmentDataset& data,
                                 const RiskSpec& spec, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("risk_gradient_fd: step must be > 0");
    ModelParams probe = params;
    Eigen::VectorXd grad(params.theta.size());
    for (Eigen::Index j = 0; j < params.theta.size(); ++j) {
        double orig = probe.theta(j);
        probe.theta(j) = orig + step;
        double up = empirical_risk(probe, data, spec);
        probe.theta(j) = orig - step;
        double down = empirical_risk(probe, data, spec);
        probe.theta(j) = orig;
        grad(j) = (up - down) / (2.0 * step);
    }
    return grad;
}

Eigen::VectorXd output_weighted_gradient(const ModelParams& params,
                                         const Eigen::MatrixXd& X,
                                         const Eigen::MatrixXd& D) {
    if (D.rows() != X.rows())
        throw std::invalid_argument("output_weighted_gradient: row mismatch");
    auto n = static_cast<double>(X.rows());
    switch (params.shape.kind) {
        case ModelKind::Linear:
        case ModelKind::Logistic: {
            // f = X theta for Linear; for Logistic the caller weights the
            // sigmoid derivative into D itself (f here means the raw score).
            if (D.cols() != 1)
                throw std::invalid_argument("output_weighted_gradient: expected one output");
            return X.transpose() * D.col(0) / n;
        }
        case ModelKind::Mlp: {
            Forward fw = mlp_forward(params, X);
            if (D.cols() != fw.outputs.cols())
                throw std::invalid_argument("output_weighted_gradient: column mismatch");
            return mlp_backprop(params, fw, D / n);
        }
    }
    throw std::logic_error("output_weighted_gradient: unknown model kind");
}

double accuracy(const ModelParams& params, const EnvironmentDataset& data) {
    Eigen::MatrixXd out = predict(params, data.X);
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        Eigen::Index guess = 0;
        if (out.cols() == 1) {
            guess = out(i, 0) > 0.5 ? 1 : 0;
        } else {
            out.row(i).maxCoeff(&guess);
        }
        if (guess == static_cast<Eigen::Index>(std::lround(data.y(i)))) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.n());
}

} // namespace coco
