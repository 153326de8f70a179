#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coco/objectives.hpp"
#include "coco/optimizer.hpp"
#include "coco/rng.hpp"
#include "coco/scenarios.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace coco;

namespace {

EnvironmentDataset random_env(Rng& rng, Eigen::Index n, Eigen::Index p,
                              const std::string& id = "e") {
    EnvironmentDataset env;
    env.env_id = id;
    env.X.resize(n, p);
    env.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) env.X(i, j) = rng.normal(0.0, 1.0);
        env.y(i) = rng.normal(0.0, 1.0);
    }
    for (Eigen::Index j = 0; j < p; ++j)
        env.covariate_names.push_back("x" + std::to_string(j + 1));
    return env;
}

MultiEnvData wrap(std::vector<EnvironmentDataset> envs) {
    MultiEnvData multi;
    multi.environments = std::move(envs);
    return multi;
}

MultiEnvData scenario_data(ScenarioKind kind, const std::vector<double>& params,
                           Eigen::Index n, std::uint64_t seed) {
    SemScenario sc;
    sc.kind = kind;
    sc.env_params = params;
    sc.n_per_env = n;
    sc.seed = seed;
    return generate(sc).multi;
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
}

OptimConfig warm_start(const Eigen::VectorXd& v) {
    OptimConfig cfg;
    cfg.init = InitKind::GivenVector;
    cfg.init_vector = v;
    return cfg;
}

} // namespace

TEST_CASE("closed-form ols recovers a noiseless linear rule exactly") {
    Rng rng(404);
    Eigen::Index n = 60, p = 3;
    EnvironmentDataset env = random_env(rng, n, p);
    Eigen::Vector3d beta(1.5, -2.0, 0.25);
    env.y = env.X * beta;
    ModelParams ols = fit_ols_closed_form(env);
    CHECK(rel_err(ols.theta, beta) < 1e-10);
}

TEST_CASE("closed-form ols matches the symbolic per-env solution on the proxy-pair family") {
    // sigma = 1: population coefficients are (1/2, 1/2, 1/2, 1/2).
    MultiEnvData multi = scenario_data(ScenarioKind::AppendixB1, {1.0}, 100000, 915);
    ModelParams ols = fit_ols_closed_form(multi.environments[0]);
    Eigen::Vector4d expect(0.5, 0.5, 0.5, 0.5);
    CHECK((ols.theta - expect).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("pooled ols on the proxy-pair family matches the closed form") {
    MultiEnvData multi =
        scenario_data(ScenarioKind::AppendixB1, {0.2, 0.5, 1.0}, 100000, 916);
    ModelParams pooled = fit_ols_closed_form(multi);
    // With vbar the mean noise variance, the population pooled solution is
    // 1/(1+vbar) on each direct cause and vbar/(1+vbar) on each proxy.
    double vbar = (0.2 * 0.2 + 0.5 * 0.5 + 1.0 * 1.0) / 3.0;
    for (Eigen::Index j = 0; j < 2; ++j)
        CHECK(std::abs(pooled.theta(j) - 1.0 / (1.0 + vbar)) < 0.02);
    for (Eigen::Index j = 2; j < 4; ++j)
        CHECK(std::abs(pooled.theta(j) - vbar / (1.0 + vbar)) < 0.02);
}

TEST_CASE("ols rejects a singular covariate Gram matrix") {
    Rng rng(405);
    EnvironmentDataset env = random_env(rng, 50, 3);
    env.X.col(2) = env.X.col(0); // exact collinearity
    CHECK_THROWS_AS((void)fit_ols_closed_form(env), std::runtime_error);
}

TEST_CASE("erm descent lands on the closed-form ols solution") {
    MultiEnvData multi = scenario_data(ScenarioKind::Case5, {1.0}, 2000, 82);
    ModelParams ols = fit_ols_closed_form(multi.environments[0]);

    ObjectiveSpec obj;
    obj.method = Method::Erm;
    OptimConfig cfg;
    cfg.step_size = 0.1;
    cfg.max_iters = 20000;
    // The acceptance rule compares objective values, so the reachable gradient
    // norm bottoms out near sqrt(eps * f_min / eta); stay above that floor.
    cfg.tol = 1e-6;
    cfg.init_jitter_sd = 0.0;
    FitResult res = fit(multi, RiskSpec{}, obj, cfg, ModelShape::linear(multi.p()));

    CHECK(res.diagnostic.empty());
    CHECK(res.converged);
    CHECK(rel_err(res.params.theta, ols.theta) < 1e-4);
}

TEST_CASE("masked descent recovers the causal coefficients on the proxy-child family") {
    MultiEnvData multi = scenario_data(ScenarioKind::Case5, {0.5, 2.0}, 10000, 83);

    ObjectiveSpec obj;
    obj.method = Method::CocoModified;
    obj.nondescendant_mask = {0};
    OptimConfig cfg = warm_start(fit_ols_closed_form(multi).theta);
    cfg.step_size = 0.1;
    cfg.max_iters = 50000;
    cfg.tol = 1e-9;
    FitResult res = fit(multi, RiskSpec{}, obj, cfg, ModelShape::linear(multi.p()));

    Eigen::Vector2d truth(2.0, 0.0);
    CHECK((res.params.theta - truth).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("masked descent recovers the causal coefficients on the proxy-pair family") {
    MultiEnvData multi =
        scenario_data(ScenarioKind::AppendixB1, {0.2, 0.5, 1.0}, 40000, 84);

    ObjectiveSpec obj;
    obj.method = Method::CocoModified;
    obj.nondescendant_mask = {0, 1};
    OptimConfig cfg = warm_start(fit_ols_closed_form(multi).theta);
    cfg.step_size = 0.1;
    cfg.max_iters = 50000;
    cfg.tol = 1e-9;
    FitResult res = fit(multi, RiskSpec{}, obj, cfg, ModelShape::linear(multi.p()));

    Eigen::Vector4d truth(1.0, 1.0, 0.0, 0.0);
    CHECK((res.params.theta - truth).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("the three outer-gradient modes agree on linear models") {
    Rng rng(520);
    std::vector<ObjectiveSpec> specs;
    {
        ObjectiveSpec s;
        s.method = Method::Coco;
        specs.push_back(s);
        s.method = Method::CocoModified;
        s.nondescendant_mask = {0};
        specs.push_back(s);
        s.method = Method::NaiveCoco;
        s.nondescendant_mask = {1};
        specs.push_back(s);
        s = ObjectiveSpec{};
        s.method = Method::CocoErm;
        s.lambda_w = 0.7;
        s.lambda_r = 1.3;
        specs.push_back(s);
        s = ObjectiveSpec{};
        s.method = Method::Irmv1;
        s.lambda = 2.5;
        specs.push_back(s);
        s = ObjectiveSpec{};
        s.method = Method::Vrex;
        s.lambda_vrex = 1.7;
        specs.push_back(s);
    }

    for (int inst = 0; inst < 20; ++inst) {
        Eigen::Index p = 4;
        MultiEnvData multi =
            wrap({random_env(rng, 60, p, "a"), random_env(rng, 60, p, "b")});
        ModelParams params{ModelShape::linear(p), Eigen::VectorXd::Zero(p)};
        for (Eigen::Index j = 0; j < p; ++j) params.theta(j) = rng.normal(0.0, 1.0);

        for (const auto& obj : specs) {
            OptimConfig cfg;
            cfg.outer_grad = OuterGrad::Analytic;
            Eigen::VectorXd ga = outer_gradient(params, multi, RiskSpec{}, obj, cfg);

            cfg.outer_grad = OuterGrad::FiniteDifference;
            cfg.fd_step = 1e-5;
            Eigen::VectorXd gf = outer_gradient(params, multi, RiskSpec{}, obj, cfg);
            CHECK(rel_err(gf, ga) < 1e-4);

            cfg.outer_grad = OuterGrad::GradientDifference;
            cfg.fd_step = 1e-4;
            Eigen::VectorXd gd = outer_gradient(params, multi, RiskSpec{}, obj, cfg);
            // The risk gradient is affine in theta here, so the differenced
            // Hessian-vector product is exact up to rounding.
            CHECK(rel_err(gd, ga) < 1e-6);
        }
    }
}

TEST_CASE("the penalty gradient vanishes identically at the origin") {
    Rng rng(521);
    MultiEnvData multi = wrap({random_env(rng, 80, 3, "a"), random_env(rng, 80, 3, "b")});
    ModelParams zero{ModelShape::linear(3), Eigen::VectorXd::Zero(3)};
    ObjectiveSpec obj;
    obj.method = Method::Coco;

    OptimConfig cfg;
    cfg.outer_grad = OuterGrad::Analytic;
    CHECK(outer_gradient(zero, multi, RiskSpec{}, obj, cfg).norm() == 0.0);
    cfg.outer_grad = OuterGrad::GradientDifference;
    CHECK(outer_gradient(zero, multi, RiskSpec{}, obj, cfg).norm() == 0.0);
}

TEST_CASE("the masked objective is nearly stationary at the true coefficients") {
    MultiEnvData multi = scenario_data(ScenarioKind::Case5, {0.5, 2.0}, 100000, 85);
    ModelParams at_truth{ModelShape::linear(2), Eigen::Vector2d(2.0, 0.0)};
    ObjectiveSpec obj;
    obj.method = Method::CocoModified;
    obj.nondescendant_mask = {0};
    OptimConfig cfg;
    Eigen::VectorXd g = outer_gradient(at_truth, multi, RiskSpec{}, obj, cfg);
    CHECK(g.norm() < 1e-2);
}

TEST_CASE("outer_gradient rejects the plain risk method") {
    Rng rng(522);
    MultiEnvData multi = wrap({random_env(rng, 30, 2)});
    ModelParams params{ModelShape::linear(2), Eigen::Vector2d(0.3, -0.2)};
    ObjectiveSpec obj;
    obj.method = Method::Erm;
    CHECK_THROWS_AS((void)outer_gradient(params, multi, RiskSpec{}, obj, OptimConfig{}),
                    std::invalid_argument);
}

TEST_CASE("fits are reproducible from the seed and differ across seeds") {
    MultiEnvData multi = scenario_data(ScenarioKind::Case5, {0.5, 2.0}, 1500, 86);
    ObjectiveSpec obj;
    obj.method = Method::Coco;
    OptimConfig cfg;
    cfg.max_iters = 200;
    cfg.init_jitter_sd = 0.1;
    cfg.seed = 123;
    ModelShape shape = ModelShape::linear(multi.p());

    FitResult a = fit(multi, RiskSpec{}, obj, cfg, shape);
    FitResult b = fit(multi, RiskSpec{}, obj, cfg, shape);
    CHECK((a.params.theta - b.params.theta).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(a.objective_trace.size() == b.objective_trace.size());
    for (size_t i = 0; i < a.objective_trace.size(); ++i) {
        CHECK(a.objective_trace[i].first == b.objective_trace[i].first);
        CHECK(a.objective_trace[i].second == b.objective_trace[i].second);
    }

    cfg.seed = 124;
    FitResult c = fit(multi, RiskSpec{}, obj, cfg, shape);
    CHECK((a.params.theta - c.params.theta).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("a runaway start is reported as divergence") {
    Rng rng(523);
    MultiEnvData multi = wrap({random_env(rng, 50, 3)});
    ObjectiveSpec obj;
    obj.method = Method::Erm;
    OptimConfig cfg = warm_start(Eigen::VectorXd::Constant(3, 1e8));
    cfg.step_size = 1e6;
    cfg.max_iters = 50;
    FitResult res = fit(multi, RiskSpec{}, obj, cfg, ModelShape::linear(3));
    CHECK_FALSE(res.converged);
    CHECK(res.diagnostic == "objective diverged past 1e12");
}

TEST_CASE("a non-finite start is reported without iterating") {
    Rng rng(524);
    MultiEnvData multi = wrap({random_env(rng, 50, 3)});
    ObjectiveSpec obj;
    obj.method = Method::Erm;
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
    bad(1) = std::numeric_limits<double>::quiet_NaN();
    OptimConfig cfg = warm_start(bad);
    FitResult res = fit(multi, RiskSpec{}, obj, cfg, ModelShape::linear(3));
    CHECK_FALSE(res.converged);
    CHECK(res.diagnostic == "objective non-finite at the initial point");
    CHECK(res.objective_trace.size() == 1);
    CHECK(std::isnan(res.final_gradient_norm));
}

TEST_CASE("the returned iterate is the best one recorded") {
    MultiEnvData multi = scenario_data(ScenarioKind::Case5, {0.5, 2.0}, 2000, 87);
    ObjectiveSpec obj;
    obj.method = Method::Coco;
    OptimConfig cfg;
    cfg.max_iters = 500;
    cfg.init_jitter_sd = 0.3;
    cfg.seed = 9;
    ModelShape shape = ModelShape::linear(multi.p());
    FitResult res = fit(multi, RiskSpec{}, obj, cfg, shape);

    double at_params = total_objective(res.params, multi, RiskSpec{}, obj);
    double best_seen = res.objective_trace.front().second;
    for (const auto& [iter, f] : res.objective_trace) best_seen = std::min(best_seen, f);
    CHECK(at_params <= best_seen + 1e-12);
    CHECK(at_params <= res.objective_trace.front().second);
}

TEST_CASE("convergence implies the gradient tolerance was met") {
    MultiEnvData multi = scenario_data(ScenarioKind::Case5, {1.0}, 1000, 88);
    ObjectiveSpec obj;
    obj.method = Method::Erm;
    OptimConfig cfg;
    cfg.max_iters = 50000;
    cfg.tol = 1e-6;
    cfg.init_jitter_sd = 0.0;
    FitResult res = fit(multi, RiskSpec{}, obj, cfg, ModelShape::linear(multi.p()));
    REQUIRE(res.converged);
    CHECK(res.final_gradient_norm < cfg.tol);
    CHECK(res.diagnostic.empty());
}

TEST_CASE("an oversized step is rescued by backtracking") {
    MultiEnvData multi = scenario_data(ScenarioKind::Case5, {1.0}, 1000, 89);
    ModelParams ols = fit_ols_closed_form(multi.environments[0]);
    ObjectiveSpec obj;
    obj.method = Method::Erm;
    OptimConfig cfg;
    cfg.step_size = 10.0; // far above the stable step for this Gram spectrum
    cfg.max_iters = 20000;
    cfg.tol = 1e-6;
    cfg.init_jitter_sd = 0.0;
    FitResult res = fit(multi, RiskSpec{}, obj, cfg, ModelShape::linear(multi.p()));
    CHECK(res.converged);
    CHECK(rel_err(res.params.theta, ols.theta) < 1e-4);
}

TEST_CASE("a huge escape norm keeps the anneal schedule inert") {
    MultiEnvData multi = scenario_data(ScenarioKind::Case5, {0.5, 2.0}, 1500, 90);
    ObjectiveSpec obj;
    obj.method = Method::CocoErm;
    obj.lambda_r = 2.0;
    OptimConfig cfg = warm_start(fit_ols_closed_form(multi).theta);
    cfg.max_iters = 400;
    ModelShape shape = ModelShape::linear(multi.p());

    cfg.anneal.enabled = false;
    FitResult off = fit(multi, RiskSpec{}, obj, cfg, shape);
    cfg.anneal.enabled = true;
    cfg.anneal.escape_norm = 1e6; // never exceeded, so lambda_r never decays
    FitResult on = fit(multi, RiskSpec{}, obj, cfg, shape);

    CHECK((off.params.theta - on.params.theta).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(off.objective_trace.size() == on.objective_trace.size());
    for (size_t i = 0; i < off.objective_trace.size(); ++i)
        CHECK(off.objective_trace[i].second == on.objective_trace[i].second);
}

TEST_CASE("annealing drives the solution toward a pure penalty optimum") {
    MultiEnvData multi = scenario_data(ScenarioKind::Case5, {0.5, 2.0}, 10000, 91);
    ObjectiveSpec obj;
    obj.method = Method::CocoErm;
    obj.lambda_r = 2.0;
    OptimConfig cfg = warm_start(fit_ols_closed_form(multi).theta);
    cfg.step_size = 0.05;
    cfg.max_iters = 4000;
    cfg.tol = 1e-12;
    ModelShape shape = ModelShape::linear(multi.p());

    FitResult plain = fit(multi, RiskSpec{}, obj, cfg, shape);
    cfg.anneal.enabled = true;
    cfg.anneal.trigger_fraction = 0.25;
    cfg.anneal.escape_norm = 1e-6;
    FitResult annealed = fit(multi, RiskSpec{}, obj, cfg, shape);

    ObjectiveSpec pure;
    pure.method = Method::Coco;
    double pen_plain = total_objective(plain.params, multi, RiskSpec{}, pure);
    double pen_annealed = total_objective(annealed.params, multi, RiskSpec{}, pure);
    // With the risk term annealed away the descent settles on a penalty zero;
    // the fixed-lambda run stays at the risk/penalty compromise.
    CHECK(pen_annealed < 1e-5);
    CHECK(pen_annealed < pen_plain);
    CHECK((plain.params.theta - annealed.params.theta).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("descent works on a small nonlinear model via differenced gradients") {
    MultiEnvData multi = scenario_data(ScenarioKind::Case5, {0.5, 2.0}, 400, 92);
    ObjectiveSpec obj;
    obj.method = Method::Vrex;
    obj.lambda_vrex = 1.0;
    OptimConfig cfg;
    cfg.outer_grad = OuterGrad::GradientDifference;
    cfg.step_size = 0.05;
    cfg.max_iters = 300;
    cfg.init_jitter_sd = 0.1;
    cfg.seed = 5;
    ModelShape shape = ModelShape::mlp(multi.p(), {3}, 1);

    FitResult res = fit(multi, RiskSpec{}, obj, cfg, shape);
    CHECK(res.objective_trace.back().second < res.objective_trace.front().second);

    FitResult again = fit(multi, RiskSpec{}, obj, cfg, shape);
    CHECK((res.params.theta - again.params.theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("variance-of-risks on duplicated environments reduces to the pooled risk") {
    Rng rng(525);
    EnvironmentDataset env = random_env(rng, 500, 3);
    Eigen::Vector3d beta(1.0, -0.5, 0.2);
    env.y = env.X * beta + env.y * 0.1; // keep a little noise
    EnvironmentDataset copy = env;
    copy.env_id = "copy";
    MultiEnvData multi = wrap({env, copy});

    ObjectiveSpec obj;
    obj.method = Method::Vrex;
    obj.lambda_vrex = 10.0;
    OptimConfig cfg;
    cfg.max_iters = 30000;
    cfg.tol = 1e-11;
    cfg.init_jitter_sd = 0.0;
    FitResult res = fit(multi, RiskSpec{}, obj, cfg, ModelShape::linear(3));
    ModelParams ols = fit_ols_closed_form(env);
    CHECK(rel_err(res.params.theta, ols.theta) < 1e-3);
}

TEST_CASE("configuration validation rejects out-of-range knobs") {
    OptimConfig cfg;
    cfg.step_size = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = OptimConfig{};
    cfg.max_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = OptimConfig{};
    cfg.tol = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = OptimConfig{};
    cfg.fd_step = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = OptimConfig{};
    cfg.anneal.trigger_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.anneal.trigger_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = OptimConfig{};
    cfg.anneal.decay_factor = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.anneal.decay_factor = 1.25;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = OptimConfig{};
    cfg.anneal.escape_norm = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = OptimConfig{};
    cfg.init_jitter_sd = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = OptimConfig{};
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("fit rejects a mismatched warm start or model width") {
    Rng rng(526);
    MultiEnvData multi = wrap({random_env(rng, 40, 3)});
    ObjectiveSpec obj;
    obj.method = Method::Erm;
    OptimConfig cfg = warm_start(Eigen::Vector2d(1.0, 2.0)); // wrong length
    CHECK_THROWS_AS((void)fit(multi, RiskSpec{}, obj, cfg, ModelShape::linear(3)),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)fit(multi, RiskSpec{}, obj, OptimConfig{}, ModelShape::linear(4)),
                    std::invalid_argument);
}
