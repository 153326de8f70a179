#include "coco/optimizer.hpp"

#include "coco/rng.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace coco {

namespace {

constexpr double kDivergenceCap = 1e12;
constexpr double kLambdaFloor = 1e-12;
constexpr double kMaxCondition = 1e12;

Eigen::VectorXd pin_ones(const Eigen::VectorXd& theta,
                         const std::vector<Eigen::Index>& idx) {
    Eigen::VectorXd t = theta;
    for (auto j : idx) t(j) = 1.0;
    return t;
}

// 1 on free coordinates, 0 on pinned ones: d theta~ / d theta.
Eigen::VectorXd free_mask(Eigen::Index dim, const std::vector<Eigen::Index>& idx) {
    Eigen::VectorXd d = Eigen::VectorXd::Ones(dim);
    for (auto j : idx) d(j) = 0.0;
    return d;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& f) {
    Eigen::MatrixXd p = (f.colwise() - f.rowwise().maxCoeff()).array().exp();
    p.array().colwise() /= p.rowwise().sum().array();
    return p;
}

// Signed derivative s of the risk in a multiplicative output scale at 1,
// together with its exact gradient in theta.  irmv1_penalty is s^2, so the
// penalty gradient is 2 s grad(s).
std::pair<double, Eigen::VectorXd> irm_scale_term(const ModelParams& params,
                                                  const EnvironmentDataset& env,
                                                  const RiskSpec& risk) {
    auto n = static_cast<double>(env.n());
    switch (params.shape.kind) {
        case ModelKind::Linear: {
            Eigen::VectorXd yhat = predict(params, env.X).col(0);
            double s = yhat.cwiseProduct(yhat - env.y).sum() / n;
            Eigen::MatrixXd D = 2.0 * yhat - env.y;
            return {s, output_weighted_gradient(params, env.X, D)};
        }
        case ModelKind::Logistic: {
            Eigen::VectorXd score = env.X * params.theta;
            Eigen::VectorXd p = predict(params, env.X).col(0);
            Eigen::VectorXd pp = p.array() * (1.0 - p.array());
            if (risk.loss == Loss::CrossEntropy) {
                double s = score.cwiseProduct(p - env.y).sum() / n;
                Eigen::MatrixXd D = pp.cwiseProduct(score) + p - env.y;
                return {s, output_weighted_gradient(params, env.X, D)};
            }
            Eigen::VectorXd resid = p - env.y;
            double s = resid.cwiseProduct(pp).cwiseProduct(score).sum() / n;
            Eigen::VectorXd curv = pp.array() * (1.0 - 2.0 * p.array());
            Eigen::MatrixXd D = pp.cwiseProduct(pp).cwiseProduct(score) +
                                resid.cwiseProduct(curv).cwiseProduct(score) +
                                resid.cwiseProduct(pp);
            return {s, output_weighted_gradient(params, env.X, D)};
        }
        case ModelKind::Mlp: {
            Eigen::MatrixXd f = predict(params, env.X);
            if (risk.loss == Loss::Squared) {
                Eigen::VectorXd f0 = f.col(0);
                double s = f0.cwiseProduct(f0 - env.y).sum() / n;
                Eigen::MatrixXd D = 2.0 * f0 - env.y;
                return {s, output_weighted_gradient(params, env.X, D)};
            }
            Eigen::MatrixXd P = softmax_rows(f);
            Eigen::MatrixXd D(f.rows(), f.cols());
            double s = 0.0;
            for (Eigen::Index i = 0; i < f.rows(); ++i) {
                auto label = static_cast<Eigen::Index>(std::lround(env.y(i)));
                if (label < 0 || label >= f.cols())
                    throw std::invalid_argument("irm scale term: label out of range");
                double pf = P.row(i).dot(f.row(i));
                s += pf - f(i, label);
                D.row(i) = P.row(i) + P.row(i).cwiseProduct(f.row(i)) - pf * P.row(i);
                D(i, label) -= 1.0;
            }
            s /= n;
            return {s, output_weighted_gradient(params, env.X, D)};
        }
    }
    throw std::logic_error("irm_scale_term: unknown model kind");
}

struct Evaluator {
    const MultiEnvData& multi;
    RiskSpec risk;
    ModelShape shape;
    std::vector<Eigen::Index> mask_idx; // flat theta indices pinned to one
    OuterGrad mode;
    double fd_step;
    bool gram_capable = false; // Linear + Squared
    bool use_gram = false;     // gram_capable and no batch estimator in play
    std::vector<GramSummary> grams;

    Evaluator(const MultiEnvData& m, const RiskSpec& r, const ModelShape& s,
              const ObjectiveSpec& obj, OuterGrad md, double fd)
        : multi(m), risk(r), shape(s), mode(md), fd_step(fd) {
        auto mask = effective_mask(obj, multi);
        bool needs_mask =
            obj.method == Method::CocoModified || obj.method == Method::NaiveCoco;
        if (needs_mask && mask.empty())
            throw std::invalid_argument(
                to_string(obj.method) +
                " needs non-descendant indices, from the objective or the dataset");
        if (!mask.empty()) mask_idx = mask_param_indices(shape, mask);
        gram_capable = shape.kind == ModelKind::Linear && risk.loss == Loss::Squared;
        bool batch_estimator =
            obj.method == Method::Coco && obj.estimator == Estimator::UnbiasedApprox1;
        use_gram = gram_capable && !batch_estimator;
        if (use_gram)
            for (const auto& env : multi.environments)
                grams.push_back(gram_summary(env));
    }

    double env_count() const { return static_cast<double>(multi.environments.size()); }

    double objective(const ModelParams& p, const ObjectiveSpec& obj) const {
        if (!use_gram) return total_objective(p, multi, risk, obj);
        return gram_objective(p.theta, obj);
    }

    Eigen::VectorXd gradient(const ModelParams& p, const ObjectiveSpec& obj) const {
        if (mode == OuterGrad::FiniteDifference) return fd_gradient(p, obj);
        if (obj.method == Method::Erm) {
            // Exact in any mode: the objective is the mean risk itself.
            Eigen::VectorXd g = Eigen::VectorXd::Zero(p.theta.size());
            for (const auto& env : multi.environments)
                g += risk_gradient(p, env, risk);
            return g / env_count();
        }
        if (obj.method == Method::Coco && obj.estimator == Estimator::UnbiasedApprox1)
            throw std::invalid_argument(
                "the unbiased batch estimator has no closed gradient here; "
                "use FiniteDifference mode");
        if (mode == OuterGrad::Analytic) {
            if (!gram_capable)
                throw std::invalid_argument(
                    "Analytic outer gradients need the Linear model with Squared loss");
            return gram_gradient(p.theta, obj);
        }
        return gd_gradient(p, obj);
    }

    // ---- Gram-backed closed forms (Linear + Squared) ----

    static double gram_risk(const GramSummary& G, const Eigen::VectorXd& th) {
        return (G.yy - 2.0 * th.dot(G.b) + th.dot(G.W * th)) / 2.0;
    }

    static Eigen::VectorXd gram_grad(const GramSummary& G, const Eigen::VectorXd& th) {
        return G.W * th - G.b;
    }

    double gram_objective(const Eigen::VectorXd& th, const ObjectiveSpec& obj) const {
        double m = env_count();
        double total = 0.0;
        switch (obj.method) {
            case Method::Erm: {
                for (const auto& G : grams) total += gram_risk(G, th);
                return total / m;
            }
            case Method::Coco: {
                for (const auto& G : grams)
                    total += gram_grad(G, th).cwiseProduct(th).squaredNorm();
                return total / m;
            }
            case Method::CocoModified: {
                Eigen::VectorXd tt = pin_ones(th, mask_idx);
                for (const auto& G : grams) {
                    Eigen::VectorXd g = gram_grad(G, th);
                    total += g.cwiseProduct(tt).squaredNorm();
                    if (obj.lambda_w > 0) {
                        double s = g.dot(th);
                        total += obj.lambda_w * s * s;
                    }
                }
                return total / m;
            }
            case Method::CocoErm: {
                for (const auto& G : grams) {
                    Eigen::VectorXd g = gram_grad(G, th);
                    total += g.cwiseProduct(th).squaredNorm();
                    if (obj.lambda_w > 0) {
                        double s = g.dot(th);
                        total += obj.lambda_w * s * s;
                    }
                    total += obj.lambda_r * gram_risk(G, th);
                }
                return total / m;
            }
            case Method::Irmv1: {
                for (const auto& G : grams) {
                    double s = th.dot(G.W * th) - th.dot(G.b);
                    total += gram_risk(G, th) + obj.lambda * s * s;
                }
                return total; // sums environments
            }
            case Method::Vrex: {
                Eigen::VectorXd risks(grams.size());
                for (std::size_t e = 0; e < grams.size(); ++e)
                    risks(static_cast<Eigen::Index>(e)) = gram_risk(grams[e], th);
                double mean = risks.mean();
                double var = grams.size() < 2
                    ? 0.0
                    : (risks.array() - mean).matrix().squaredNorm() / (m - 1.0);
                return mean + obj.lambda_vrex * var;
            }
            case Method::NaiveCoco: {
                Eigen::VectorXd tt = pin_ones(th, mask_idx);
                for (const auto& G : grams) {
                    double s = gram_grad(G, th).dot(tt);
                    total += s * s;
                }
                return total / m;
            }
        }
        throw std::logic_error("gram_objective: unknown method");
    }

    Eigen::VectorXd gram_gradient(const Eigen::VectorXd& th, const ObjectiveSpec& obj) const {
        double m = env_count();
        Eigen::Index dim = th.size();
        Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
        switch (obj.method) {
            case Method::Erm:
                break; // handled by the caller
            case Method::Coco: {
                for (const auto& G : grams) {
                    Eigen::VectorXd g = gram_grad(G, th);
                    total += 2.0 * (G.W * g.cwiseProduct(th).cwiseProduct(th)) +
                             2.0 * g.cwiseProduct(g).cwiseProduct(th);
                }
                return total / m;
            }
            case Method::CocoModified: {
                Eigen::VectorXd tt = pin_ones(th, mask_idx);
                Eigen::VectorXd d = free_mask(dim, mask_idx);
                for (const auto& G : grams) {
                    Eigen::VectorXd g = gram_grad(G, th);
                    total += 2.0 * (G.W * g.cwiseProduct(tt).cwiseProduct(tt)) +
                             2.0 * g.cwiseProduct(g).cwiseProduct(tt).cwiseProduct(d);
                    if (obj.lambda_w > 0) {
                        double s = g.dot(th);
                        total += obj.lambda_w * 2.0 * s * (G.W * th + g);
                    }
                }
                return total / m;
            }
            case Method::CocoErm: {
                for (const auto& G : grams) {
                    Eigen::VectorXd g = gram_grad(G, th);
                    total += 2.0 * (G.W * g.cwiseProduct(th).cwiseProduct(th)) +
                             2.0 * g.cwiseProduct(g).cwiseProduct(th);
                    if (obj.lambda_w > 0) {
                        double s = g.dot(th);
                        total += obj.lambda_w * 2.0 * s * (G.W * th + g);
                    }
                    total += obj.lambda_r * g;
                }
                return total / m;
            }
            case Method::Irmv1: {
                for (const auto& G : grams) {
                    Eigen::VectorXd g = gram_grad(G, th);
                    double s = th.dot(G.W * th) - th.dot(G.b);
                    total += g + obj.lambda * 2.0 * s * (2.0 * (G.W * th) - G.b);
                }
                return total; // sums environments
            }
            case Method::Vrex: {
                Eigen::VectorXd risks(grams.size());
                std::vector<Eigen::VectorXd> gs(grams.size());
                Eigen::VectorXd gmean = Eigen::VectorXd::Zero(dim);
                for (std::size_t e = 0; e < grams.size(); ++e) {
                    risks(static_cast<Eigen::Index>(e)) = gram_risk(grams[e], th);
                    gs[e] = gram_grad(grams[e], th);
                    gmean += gs[e];
                }
                gmean /= m;
                total = gmean;
                if (grams.size() >= 2) {
                    double rmean = risks.mean();
                    Eigen::VectorXd vg = Eigen::VectorXd::Zero(dim);
                    for (std::size_t e = 0; e < grams.size(); ++e)
                        vg += (risks(static_cast<Eigen::Index>(e)) - rmean) *
                              (gs[e] - gmean);
                    total += obj.lambda_vrex * (2.0 / (m - 1.0)) * vg;
                }
                return total;
            }
            case Method::NaiveCoco: {
                Eigen::VectorXd tt = pin_ones(th, mask_idx);
                Eigen::VectorXd d = free_mask(dim, mask_idx);
                for (const auto& G : grams) {
                    Eigen::VectorXd g = gram_grad(G, th);
                    double s = g.dot(tt);
                    total += 2.0 * s * (G.W * tt + g.cwiseProduct(d));
                }
                return total / m;
            }
        }
        throw std::logic_error("gram_gradient: unexpected method");
    }

    // ---- gradient differencing (any model kind) ----

    Eigen::VectorXd gd_gradient(const ModelParams& p, const ObjectiveSpec& obj) const {
        const Eigen::VectorXd& th = p.theta;
        Eigen::Index dim = th.size();
        double m = env_count();
        double tn = th.norm();
        Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);

        // Hessian-vector product of one environment's risk by central
        // differences of the exact risk gradient.
        auto hvp = [&](const EnvironmentDataset& env, const Eigen::VectorXd& v) {
            double vn = v.norm();
            if (!(vn > 0)) return Eigen::VectorXd::Zero(dim).eval();
            double h = fd_step * (1.0 + tn) / vn;
            ModelParams plus{shape, th + h * v};
            ModelParams minus{shape, th - h * v};
            return ((risk_gradient(plus, env, risk) - risk_gradient(minus, env, risk)) /
                    (2.0 * h))
                .eval();
        };

        switch (obj.method) {
            case Method::Erm:
                break; // handled by the caller
            case Method::Coco: {
                for (const auto& env : multi.environments) {
                    Eigen::VectorXd g = risk_gradient(p, env, risk);
                    total += 2.0 * hvp(env, g.cwiseProduct(th).cwiseProduct(th)) +
                             2.0 * g.cwiseProduct(g).cwiseProduct(th);
                }
                return total / m;
            }
            case Method::CocoModified: {
                Eigen::VectorXd tt = pin_ones(th, mask_idx);
                Eigen::VectorXd d = free_mask(dim, mask_idx);
                for (const auto& env : multi.environments) {
                    Eigen::VectorXd g = risk_gradient(p, env, risk);
                    total += 2.0 * hvp(env, g.cwiseProduct(tt).cwiseProduct(tt)) +
                             2.0 * g.cwiseProduct(g).cwiseProduct(tt).cwiseProduct(d);
                    if (obj.lambda_w > 0) {
                        double s = g.dot(th);
                        total += obj.lambda_w * 2.0 * s * (hvp(env, th) + g);
                    }
                }
                return total / m;
            }
            case Method::CocoErm: {
                for (const auto& env : multi.environments) {
                    Eigen::VectorXd g = risk_gradient(p, env, risk);
                    total += 2.0 * hvp(env, g.cwiseProduct(th).cwiseProduct(th)) +
                             2.0 * g.cwiseProduct(g).cwiseProduct(th);
                    if (obj.lambda_w > 0) {
                        double s = g.dot(th);
                        total += obj.lambda_w * 2.0 * s * (hvp(env, th) + g);
                    }
                    total += obj.lambda_r * g;
                }
                return total / m;
            }
            case Method::Irmv1: {
                for (const auto& env : multi.environments) {
                    Eigen::VectorXd g = risk_gradient(p, env, risk);
                    auto [s, ds] = irm_scale_term(p, env, risk);
                    total += g + obj.lambda * 2.0 * s * ds;
                }
                return total; // sums environments
            }
            case Method::Vrex: {
                std::size_t me = multi.environments.size();
                Eigen::VectorXd risks(static_cast<Eigen::Index>(me));
                std::vector<Eigen::VectorXd> gs(me);
                Eigen::VectorXd gmean = Eigen::VectorXd::Zero(dim);
                for (std::size_t e = 0; e < me; ++e) {
                    risks(static_cast<Eigen::Index>(e)) =
                        empirical_risk(p, multi.environments[e], risk);
                    gs[e] = risk_gradient(p, multi.environments[e], risk);
                    gmean += gs[e];
                }
                gmean /= m;
                total = gmean;
                if (me >= 2) {
                    double rmean = risks.mean();
                    Eigen::VectorXd vg = Eigen::VectorXd::Zero(dim);
                    for (std::size_t e = 0; e < me; ++e)
                        vg += (risks(static_cast<Eigen::Index>(e)) - rmean) *
                              (gs[e] - gmean);
                    total += obj.lambda_vrex * (2.0 / (m - 1.0)) * vg;
                }
                return total;
            }
            case Method::NaiveCoco: {
                Eigen::VectorXd tt = pin_ones(th, mask_idx);
                Eigen::VectorXd d = free_mask(dim, mask_idx);
                for (const auto& env : multi.environments) {
                    Eigen::VectorXd g = risk_gradient(p, env, risk);
                    double s = g.dot(tt);
                    total += 2.0 * s * (hvp(env, tt) + g.cwiseProduct(d));
                }
                return total / m;
            }
        }
        throw std::logic_error("gd_gradient: unexpected method");
    }

    Eigen::VectorXd fd_gradient(const ModelParams& p, const ObjectiveSpec& obj) const {
        Eigen::Index dim = p.theta.size();
        Eigen::VectorXd g(dim);
        ModelParams probe = p;
        for (Eigen::Index k = 0; k < dim; ++k) {
            double saved = probe.theta(k);
            probe.theta(k) = saved + fd_step;
            double fp = objective(probe, obj);
            probe.theta(k) = saved - fd_step;
            double fm = objective(probe, obj);
            probe.theta(k) = saved;
            g(k) = (fp - fm) / (2.0 * fd_step);
        }
        return g;
    }
};

ModelParams ols_from_gram(const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    double smax = sv(0);
    double smin = sv(sv.size() - 1);
    if (!(smin > 0) || !(smax / smin < kMaxCondition))
        throw std::runtime_error("ols: covariate Gram matrix is singular");
    return {ModelShape::linear(W.rows()), svd.solve(b)};
}

} // namespace

void OptimConfig::validate() const {
    if (!(step_size > 0)) throw std::invalid_argument("optim: step_size must be > 0");
    if (max_iters < 1) throw std::invalid_argument("optim: max_iters must be >= 1");
    if (!(tol > 0)) throw std::invalid_argument("optim: tol must be > 0");
    if (!(fd_step > 0)) throw std::invalid_argument("optim: fd_step must be > 0");
    if (!(anneal.trigger_fraction > 0) || anneal.trigger_fraction > 1)
        throw std::invalid_argument("optim: anneal.trigger_fraction must be in (0, 1]");
    if (!(anneal.decay_factor > 0) || anneal.decay_factor > 1)
        throw std::invalid_argument("optim: anneal.decay_factor must be in (0, 1]");
    if (anneal.escape_norm < 0)
        throw std::invalid_argument("optim: anneal.escape_norm must be >= 0");
    if (init_jitter_sd < 0)
        throw std::invalid_argument("optim: init_jitter_sd must be >= 0");
}

FitResult fit(const MultiEnvData& multi, const RiskSpec& risk, const ObjectiveSpec& obj,
              const OptimConfig& cfg, const ModelShape& shape) {
    multi.validate();
    shape.validate();
    cfg.validate();
    obj.validate();
    if (shape.input != multi.p())
        throw std::invalid_argument("fit: model input width must match covariate count");

    Evaluator ev(multi, risk, shape, obj, cfg.outer_grad, cfg.fd_step);

    Eigen::Index dim = shape.param_count();
    ModelParams cur{shape, Eigen::VectorXd::Zero(dim)};
    if (cfg.init == InitKind::ZeroPlusJitter) {
        if (cfg.init_jitter_sd > 0) {
            Rng rng(cfg.seed);
            double var = cfg.init_jitter_sd * cfg.init_jitter_sd;
            for (Eigen::Index k = 0; k < dim; ++k) cur.theta(k) = rng.normal(0.0, var);
        }
    } else {
        if (cfg.init_vector.size() != dim)
            throw std::invalid_argument("fit: init vector length must match parameter count");
        cur.theta = cfg.init_vector;
    }

    ObjectiveSpec live = obj;
    double escape = cfg.anneal.escape_norm > 0
        ? cfg.anneal.escape_norm
        : 0.1 * std::sqrt(static_cast<double>(dim));

    FitResult out;
    double f_cur = ev.objective(cur, live);
    out.objective_trace.emplace_back(0, f_cur);
    if (!std::isfinite(f_cur)) {
        out.params = cur;
        out.final_gradient_norm = std::numeric_limits<double>::quiet_NaN();
        out.diagnostic = "objective non-finite at the initial point";
        return out;
    }

    double f_init = f_cur;
    double best_f = f_cur;
    Eigen::VectorXd best_th = cur.theta;
    double eta = cfg.step_size;
    int streak = 0;
    double gnorm = std::numeric_limits<double>::quiet_NaN();
    bool hit_tol = false;
    std::string diag;

    for (long iter = 1; iter <= cfg.max_iters; ++iter) {
        if (cfg.anneal.enabled && live.lambda_r > 0 &&
            static_cast<double>(iter) >
                cfg.anneal.trigger_fraction * static_cast<double>(cfg.max_iters) &&
            cur.theta.norm() > escape) {
            live.lambda_r *= cfg.anneal.decay_factor;
            if (live.lambda_r < kLambdaFloor) live.lambda_r = 0.0;
            // The objective changed under us; re-anchor both trackers.
            f_cur = ev.objective(cur, live);
            best_f = ev.objective(ModelParams{shape, best_th}, live);
            if (f_cur < best_f) {
                best_f = f_cur;
                best_th = cur.theta;
            }
        }

        Eigen::VectorXd g = ev.gradient(cur, live);
        gnorm = g.norm();
        if (!std::isfinite(gnorm)) {
            diag = "gradient non-finite";
            break;
        }
        if (gnorm < cfg.tol) {
            hit_tol = true;
            break;
        }

        Eigen::VectorXd trial;
        double f_trial = 0.0;
        int tries = 0;
        for (;;) {
            trial = cur.theta - eta * g;
            f_trial = ev.objective(ModelParams{shape, trial}, live);
            if (std::isfinite(f_trial) && f_trial <= f_cur) break;
            if (++tries >= 40) break;
            eta *= 0.5;
        }
        if (tries >= 40 && !std::isfinite(f_trial)) {
            diag = "no finite objective along the step direction";
            break;
        }
        if (tries > 0) {
            streak = 0;
        } else if (++streak >= 10) {
            eta = cfg.step_size;
            streak = 0;
        }

        cur.theta = std::move(trial);
        f_cur = f_trial;
        out.objective_trace.emplace_back(iter, f_cur);
        if (f_cur < best_f) {
            best_f = f_cur;
            best_th = cur.theta;
        }
        if (f_cur > kDivergenceCap) {
            diag = "objective diverged past 1e12";
            break;
        }
    }

    out.params = ModelParams{shape, std::move(best_th)};
    out.final_gradient_norm = gnorm;
    out.converged = hit_tol && best_f <= f_init && diag.empty();
    if (!out.converged && diag.empty())
        diag = hit_tol ? "best objective above the initial value"
                       : "max iterations reached before the gradient tolerance";
    out.diagnostic = out.converged ? std::string() : diag;
    return out;
}

Eigen::VectorXd outer_gradient(const ModelParams& params, const MultiEnvData& multi,
                               const RiskSpec& risk, const ObjectiveSpec& obj,
                               const OptimConfig& cfg) {
    if (obj.method == Method::Erm)
        throw std::invalid_argument("outer_gradient: Erm has no penalty to differentiate");
    multi.validate();
    params.validate();
    cfg.validate();
    obj.validate();
    if (params.shape.input != multi.p())
        throw std::invalid_argument("outer_gradient: model width must match covariates");
    Evaluator ev(multi, risk, params.shape, obj, cfg.outer_grad, cfg.fd_step);
    return ev.gradient(params, obj);
}

ModelParams fit_ols_closed_form(const EnvironmentDataset& data) {
    data.validate();
    GramSummary G = gram_summary(data);
    return ols_from_gram(G.W, G.b);
}

ModelParams fit_ols_closed_form(const MultiEnvData& multi) {
    multi.validate();
    Eigen::Index p = multi.p();
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    double total_n = 0.0;
    for (const auto& env : multi.environments) {
        GramSummary G = gram_summary(env);
        auto n = static_cast<double>(G.n);
        W += n * G.W;
        b += n * G.b;
        total_n += n;
    }
    return ols_from_gram(W / total_n, b / total_n);
}

} // namespace coco
