// Python bindings for the main operations: scenario generation, fitting,
// the linear penalties, and the identification checks.  Environments cross
// the boundary as (X, y) pairs of numpy arrays.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "coco/identify.hpp"
#include "coco/objectives.hpp"
#include "coco/optimizer.hpp"
#include "coco/scenarios.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace py = pybind11;
using namespace coco;

namespace {

using EnvPair = std::pair<Eigen::MatrixXd, Eigen::VectorXd>;

MultiEnvData envs_from(const std::vector<EnvPair>& envs,
                       std::vector<std::string> names,
                       const std::vector<Eigen::Index>& mask) {
    if (envs.empty()) throw std::invalid_argument("need at least one (X, y) pair");
    Eigen::Index p = envs.front().first.cols();
    if (names.empty())
        for (Eigen::Index j = 0; j < p; ++j)
            names.push_back("x" + std::to_string(j + 1));
    MultiEnvData multi;
    for (std::size_t e = 0; e < envs.size(); ++e) {
        EnvironmentDataset env;
        env.env_id = "env" + std::to_string(e);
        env.X = envs[e].first;
        env.y = envs[e].second;
        env.covariate_names = names;
        multi.environments.push_back(std::move(env));
    }
    multi.known_nondescendants = mask;
    multi.validate();
    return multi;
}

EnvironmentDataset env_from(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    return envs_from({{X, y}}, {}, {}).environments.front();
}

Estimator estimator_from(const std::string& s) {
    if (s == "population") return Estimator::PopulationStyle;
    if (s == "unbiased") return Estimator::UnbiasedApprox1;
    if (s == "biased") return Estimator::BiasedApprox2;
    throw std::invalid_argument("unknown estimator: " + s);
}

Activation activation_from(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + s);
}

py::dict generate_py(const std::string& kind, const std::vector<double>& env_params,
                     long n_per_env, std::uint64_t seed, int gmm_classes) {
    SemScenario sc;
    sc.kind = scenario_kind_from_string(kind);
    sc.env_params = env_params;
    sc.n_per_env = n_per_env;
    sc.seed = seed;
    sc.gmm_classes = gmm_classes;
    Generated gen = generate(sc);

    py::list environments;
    for (const auto& env : gen.multi.environments) {
        py::dict d;
        d["env_id"] = env.env_id;
        d["X"] = env.X;
        d["y"] = env.y;
        environments.append(d);
    }
    py::dict out;
    out["environments"] = environments;
    out["covariates"] = gen.multi.environments.front().covariate_names;
    out["beta"] = gen.truth.beta;
    out["support"] = gen.truth.support;
    out["nondescendants"] = gen.multi.known_nondescendants;
    return out;
}

py::dict fit_py(const std::vector<EnvPair>& envs, const std::string& method,
                const std::vector<std::string>& names,
                const std::vector<Eigen::Index>& mask, double lambda_r,
                double lambda_irm, double lambda_w, double lambda_vrex,
                const std::string& model, const std::vector<Eigen::Index>& hidden,
                long classes, const std::string& activation, const std::string& loss,
                double eta, long iters, double tol, const std::string& outer_grad,
                py::object init, double init_sd, std::uint64_t seed, bool anneal,
                const std::string& estimator) {
    MultiEnvData multi = envs_from(envs, names, mask);

    ObjectiveSpec obj;
    obj.method = method_from_string(method);
    obj.lambda_r = lambda_r;
    obj.lambda = lambda_irm;
    obj.lambda_w = lambda_w;
    obj.lambda_vrex = lambda_vrex;
    obj.estimator = estimator_from(estimator);
    obj.nondescendant_mask = mask;

    ModelShape shape = ModelShape::linear(multi.p());
    if (model == "logistic") shape = ModelShape::logistic(multi.p());
    else if (model == "mlp")
        shape = ModelShape::mlp(multi.p(), hidden.empty() ? std::vector<Eigen::Index>{10, 10} : hidden,
                                classes, activation_from(activation));
    else if (model != "linear")
        throw std::invalid_argument("unknown model: " + model);

    RiskSpec risk;
    if (loss == "cross-entropy") risk.loss = Loss::CrossEntropy;
    else if (loss == "squared") risk.loss = Loss::Squared;
    else if (loss.empty())
        risk.loss = model == "mlp" && classes > 1 ? Loss::CrossEntropy : Loss::Squared;
    else
        throw std::invalid_argument("unknown loss: " + loss);

    bool linear_sq = shape.kind == ModelKind::Linear && risk.loss == Loss::Squared;
    OptimConfig cfg;
    cfg.step_size = eta;
    cfg.max_iters = iters > 0 ? iters : (linear_sq ? 50000 : 10000);
    cfg.tol = tol > 0 ? tol : (linear_sq ? 1e-9 : 1e-8);
    cfg.seed = seed;
    cfg.anneal.enabled = anneal;
    if (outer_grad == "analytic") cfg.outer_grad = OuterGrad::Analytic;
    else if (outer_grad == "finite-difference") cfg.outer_grad = OuterGrad::FiniteDifference;
    else if (outer_grad == "gradient-difference") cfg.outer_grad = OuterGrad::GradientDifference;
    else if (outer_grad.empty())
        cfg.outer_grad = linear_sq ? OuterGrad::Analytic : OuterGrad::GradientDifference;
    else
        throw std::invalid_argument("unknown outer_grad: " + outer_grad);

    if (!init.is_none()) {
        cfg.init = InitKind::GivenVector;
        cfg.init_vector = init.cast<Eigen::VectorXd>();
    } else if (linear_sq && obj.method != Method::Erm) {
        cfg.init = InitKind::GivenVector;
        cfg.init_vector = fit_ols_closed_form(multi).theta;
    } else {
        cfg.init_jitter_sd = init_sd >= 0 ? init_sd : (linear_sq ? 0.01 : 0.1);
    }

    FitResult res = fit(multi, risk, obj, cfg, shape);

    py::list trace;
    for (const auto& [it, f] : res.objective_trace)
        trace.append(py::make_tuple(it, f));
    py::dict out;
    out["params"] = res.params.theta;
    out["converged"] = res.converged;
    out["final_gradient_norm"] = res.final_gradient_norm;
    out["diagnostic"] = res.diagnostic;
    out["objective_trace"] = trace;
    return out;
}

double penalty_py(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& theta, const std::string& kind,
                  const std::vector<Eigen::Index>& mask) {
    EnvironmentDataset env = env_from(X, y);
    ModelParams params{ModelShape::linear(X.cols()), theta};
    if (kind == "coco") return coco_penalty(params, env, RiskSpec{});
    if (kind == "weak") return weak_penalty(params, env, RiskSpec{});
    if (kind == "irmv1") return irmv1_penalty(params, env, RiskSpec{});
    if (kind == "modified") return modified_penalty(params, env, RiskSpec{}, mask);
    throw std::invalid_argument("unknown penalty kind: " + kind);
}

py::dict check_py(const std::vector<EnvPair>& envs,
                  const std::vector<Eigen::Index>& nondescendants, double tol,
                  bool invariants) {
    MultiEnvData multi = envs_from(envs, {}, nondescendants);
    CheckReport rep = run_checks(multi, nondescendants, tol, invariants);
    py::list sets;
    for (const auto& s : rep.invariant_sets) {
        py::dict d;
        d["subset"] = s.subset;
        d["vector"] = s.alpha;
        sets.append(d);
    }
    py::dict out;
    out["passes"] = rep.rank_check.passes;
    out["rank"] = rep.rank_check.rank;
    out["matrix_rows"] = rep.rank_check.matrix_rows;
    out["environments_used"] = rep.environments_used;
    out["invariant_sets"] = sets;
    out["distinct_invariant_vectors"] = rep.distinct_invariant_vectors;
    return out;
}

py::dict workflow_py(const std::string& kind,
                     const std::vector<Eigen::Index>& nondescendants, long n_per_env,
                     std::uint64_t seed, int max_envs) {
    SemScenario sc;
    sc.kind = scenario_kind_from_string(kind);
    sc.n_per_env = n_per_env;
    sc.seed = seed;
    auto [multi, rep] = ico_workflow(sc, nondescendants, max_envs);
    py::dict out;
    out["passes"] = rep.rank_check.passes;
    out["rank"] = rep.rank_check.rank;
    out["matrix_rows"] = rep.rank_check.matrix_rows;
    out["environments_used"] = rep.environments_used;
    return out;
}

std::vector<Eigen::VectorXd> intersect_py(const std::vector<EnvPair>& envs, double tol) {
    return intersect_plausible_sets(envs_from(envs, {}, {}), tol);
}

Eigen::VectorXd ols_py(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    return fit_ols_closed_form(env_from(X, y)).theta;
}

Eigen::VectorXd pooled_ols_py(const std::vector<EnvPair>& envs) {
    return fit_ols_closed_form(envs_from(envs, {}, {})).theta;
}

} // namespace

PYBIND11_MODULE(_coco, m) {
    m.doc() = "multi-environment causal estimation via gradient penalties";

    m.def("generate", &generate_py, py::arg("kind"), py::arg("env_params"),
          py::arg("n_per_env") = 10000, py::arg("seed") = 0,
          py::arg("gmm_classes") = 5,
          "Sample a synthetic scenario; returns environments, covariate names, "
          "the true coefficients, and the default non-descendant set.");

    m.def("fit", &fit_py, py::arg("envs"), py::arg("method"),
          py::arg("names") = std::vector<std::string>{},
          py::arg("mask") = std::vector<Eigen::Index>{}, py::arg("lambda_r") = 0.0,
          py::arg("lambda_irm") = 0.0, py::arg("lambda_w") = 0.0,
          py::arg("lambda_vrex") = 0.0, py::arg("model") = "linear",
          py::arg("hidden") = std::vector<Eigen::Index>{}, py::arg("classes") = 2,
          py::arg("activation") = "tanh", py::arg("loss") = "",
          py::arg("eta") = 0.1, py::arg("iters") = 0, py::arg("tol") = 0.0,
          py::arg("outer_grad") = "", py::arg("init") = py::none(),
          py::arg("init_sd") = -1.0, py::arg("seed") = 0, py::arg("anneal") = false,
          py::arg("estimator") = "population",
          "Gradient-descent fit of one method over (X, y) environment pairs.");

    m.def("penalty", &penalty_py, py::arg("X"), py::arg("y"), py::arg("theta"),
          py::arg("kind") = "coco", py::arg("mask") = std::vector<Eigen::Index>{},
          "Single-environment penalty value for a linear model with squared loss.");

    m.def("check", &check_py, py::arg("envs"), py::arg("nondescendants"),
          py::arg("tol") = 0.05, py::arg("invariants") = true,
          "Identification rank check plus the invariant-set scan.");

    m.def("workflow", &workflow_py, py::arg("kind"), py::arg("nondescendants"),
          py::arg("n_per_env") = 10000, py::arg("seed") = 0, py::arg("max_envs") = 10,
          "Draw environments from the scenario family until the rank check passes.");

    m.def("intersect_plausible_sets", &intersect_py, py::arg("envs"), py::arg("tol") = 0.05,
          "Stationary points shared by every environment's enumerated set.");

    m.def("ols", &ols_py, py::arg("X"), py::arg("y"),
          "Closed-form least squares coefficients.");
    m.def("pooled_ols", &pooled_ols_py, py::arg("envs"),
          "Closed-form least squares on the pooled environments.");
}
