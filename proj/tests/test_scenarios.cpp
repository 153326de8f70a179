#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coco/scenarios.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <vector>

using namespace coco;

namespace {

SemScenario make(ScenarioKind kind, std::vector<double> params,
                 Eigen::Index n, std::uint64_t seed) {
    SemScenario sc;
    sc.kind = kind;
    sc.env_params = std::move(params);
    sc.n_per_env = n;
    sc.seed = seed;
    return sc;
}

Eigen::VectorXd ols(const EnvironmentDataset& env) {
    return (env.X.transpose() * env.X)
        .ldlt()
        .solve(env.X.transpose() * env.y);
}

// Restricted OLS on a column subset, with coefficient standard errors from
// the usual sandwich-free formula sigma^2 (X'X)^-1.
struct RestrictedFit {
    Eigen::VectorXd coef;
    Eigen::VectorXd se;
};

RestrictedFit restricted_ols(const EnvironmentDataset& env,
                             const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd Xs(env.n(), Eigen::Index(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) Xs.col(j) = env.X.col(cols[j]);
    Eigen::MatrixXd XtX = Xs.transpose() * Xs;
    Eigen::VectorXd coef = XtX.ldlt().solve(Xs.transpose() * env.y);
    Eigen::VectorXd resid = env.y - Xs * coef;
    double dof = double(env.n()) - double(cols.size());
    double s2 = resid.squaredNorm() / dof;
    Eigen::MatrixXd cov = s2 * XtX.inverse();
    RestrictedFit fit;
    fit.coef = coef;
    fit.se = cov.diagonal().cwiseSqrt();
    return fit;
}

} // namespace

TEST_CASE("b1 sample gram matches the symbolic population gram") {
    // From the structural equations with v = sigma^2:
    //   E[x_i^2]=v, E[z_i^2]=2v+1, E[x_i z_i]=v, all other cross terms 0;
    //   E[x_i y]=v, E[z_i y]=2v.
    for (double sigma : {1.0, 0.5}) {
        double v = sigma * sigma;
        SemScenario sc = make(ScenarioKind::AppendixB1, {sigma}, 100000, 17);
        Generated gen = generate(sc);
        const auto& env = gen.multi.environments[0];
        Eigen::MatrixXd G = env.X.transpose() * env.X / double(env.n());
        Eigen::MatrixXd pop(4, 4);
        pop << v, 0, v, 0,
               0, v, 0, v,
               v, 0, 2 * v + 1, 0,
               0, v, 0, 2 * v + 1;
        CHECK((G - pop).cwiseAbs().maxCoeff() < 0.05);

        Eigen::VectorXd b = env.X.transpose() * env.y / double(env.n());
        Eigen::Vector4d pop_b(v, v, 2 * v, 2 * v);
        CHECK((b - pop_b).cwiseAbs().maxCoeff() < 0.05);
    }
}

TEST_CASE("b1 per-environment ols follows the closed form in v") {
    SemScenario sc = make(ScenarioKind::AppendixB1, {0.2, 0.5, 1.0}, 100000, 3);
    Generated gen = generate(sc);
    for (std::size_t e = 0; e < 3; ++e) {
        double v = sc.env_params[e] * sc.env_params[e];
        Eigen::Vector4d expect(1 / (1 + v), 1 / (1 + v), v / (1 + v), v / (1 + v));
        Eigen::VectorXd est = ols(gen.multi.environments[e]);
        CHECK((est - expect).cwiseAbs().maxCoeff() < 0.02);
    }
}

TEST_CASE("nonidentifiable per-environment ols sits at (1.6, 1.2, 0.4)") {
    SemScenario sc = make(ScenarioKind::NonIdentifiable, {1.0, 2.0, 3.0}, 100000, 5);
    Generated gen = generate(sc);
    for (const auto& env : gen.multi.environments) {
        Eigen::VectorXd est = ols(env);
        Eigen::Vector3d expect(1.6, 1.2, 0.4);
        CHECK((est - expect).cwiseAbs().maxCoeff() < 0.05);
    }
}

TEST_CASE("true coefficients and support per scenario") {
    struct Row {
        ScenarioKind kind;
        std::vector<double> beta;
        std::vector<Eigen::Index> support;
    };
    std::vector<Row> rows = {
        {ScenarioKind::Case1, {3, 2, 0}, {0, 1}},
        {ScenarioKind::Case2, {2, 1.5, 0, 0}, {0, 1}},
        {ScenarioKind::Case3, {2, 1, 1.5, 0}, {0, 1, 2}},
        {ScenarioKind::Case4, {2, 3, 0}, {0, 1}},
        {ScenarioKind::Case5, {2, 0}, {0}},
        {ScenarioKind::AppendixB1, {1, 1, 0, 0}, {0, 1}},
        {ScenarioKind::NonIdentifiable, {2, 1.5, 0}, {0, 1}},
    };
    for (const auto& row : rows) {
        SemScenario sc = make(row.kind, {0.7}, 10, 1);
        Generated gen = generate(sc);
        REQUIRE(gen.truth.beta.size() == Eigen::Index(row.beta.size()));
        for (std::size_t j = 0; j < row.beta.size(); ++j)
            CHECK(gen.truth.beta(Eigen::Index(j)) == row.beta[j]);
        CHECK(gen.truth.support == row.support);
    }
}

TEST_CASE("case ols at large n is biased away from beta when z is included") {
    // The descendant z absorbs part of y; full OLS must not recover beta.
    SemScenario sc = make(ScenarioKind::Case5, {2.0}, 100000, 11);
    Generated gen = generate(sc);
    Eigen::VectorXd est = ols(gen.multi.environments[0]);
    CHECK(std::abs(est(1)) > 0.1);
    CHECK(std::abs(est(0) - 2.0) > 0.05);
}

TEST_CASE("regression on the true causes is invariant across environments") {
    // Assumption-2-by-construction: per-environment restricted OLS on the
    // causes agrees across environments within 3 combined standard errors.
    struct Row {
        ScenarioKind kind;
        std::vector<Eigen::Index> causes;
    };
    std::vector<Row> rows = {
        {ScenarioKind::Case1, {0, 1}}, {ScenarioKind::Case2, {0, 1}},
        {ScenarioKind::Case3, {0, 1, 2}}, {ScenarioKind::Case4, {0, 1}},
        {ScenarioKind::Case5, {0}},
    };
    for (const auto& row : rows) {
        SemScenario sc = make(row.kind, {0.5, 2.0}, 100000, 23);
        Generated gen = generate(sc);
        RestrictedFit a = restricted_ols(gen.multi.environments[0], row.causes);
        RestrictedFit b = restricted_ols(gen.multi.environments[1], row.causes);
        for (Eigen::Index j = 0; j < a.coef.size(); ++j) {
            double combined = std::sqrt(a.se(j) * a.se(j) + b.se(j) * b.se(j));
            CHECK(std::abs(a.coef(j) - b.coef(j)) < 3.0 * combined);
        }
    }
}

TEST_CASE("gmm labels are balanced and z has three columns at K=5") {
    SemScenario sc = make(ScenarioKind::Gmm, {0.05}, 50000, 31);
    Generated gen = generate(sc);
    const auto& env = gen.multi.environments[0];
    REQUIRE(env.p() == 8);
    CHECK(env.covariate_names[0] == "x1");
    CHECK(env.covariate_names[5] == "z1");
    CHECK(env.covariate_names[7] == "z3");

    std::map<int, int> counts;
    for (Eigen::Index i = 0; i < env.n(); ++i) counts[int(env.y(i))]++;
    REQUIRE(counts.size() == 5);
    double q = 1.0 / 5.0;
    double se = std::sqrt(q * (1 - q) / double(env.n()));
    for (const auto& [label, count] : counts) {
        CHECK(label >= 0);
        CHECK(label <= 4);
        CHECK(std::abs(double(count) / double(env.n()) - q) < 3 * se);
    }
    // Gmm reports the causal covariates (all of x) instead of a beta.
    CHECK(gen.truth.beta.size() == 0);
    CHECK(gen.truth.support == std::vector<Eigen::Index>{0, 1, 2, 3, 4});
}

TEST_CASE("gmm z rows copy the label atom except at the corruption rate") {
    SemScenario sc = make(ScenarioKind::Gmm, {0.3}, 20000, 37);
    Generated gen = generate(sc);
    const auto& env = gen.multi.environments[0];
    // Atoms are per-environment constants: collect the distinct z rows.
    std::map<std::vector<double>, int> atom_count;
    for (Eigen::Index i = 0; i < env.n(); ++i)
        atom_count[{env.X(i, 5), env.X(i, 6), env.X(i, 7)}]++;
    CHECK(atom_count.size() == 5);

    // The label's own atom appears with probability 1 - p + p/K.
    std::map<int, std::vector<double>> label_atom;
    for (const auto& [k, v] : gen.env_constants[0]) {
        if (k.size() < 2 || k[0] != 'u') continue;
        int cls = k[1] - '1';
        label_atom[cls].push_back(v);
    }
    REQUIRE(label_atom.size() == 5);
    int matches = 0;
    for (Eigen::Index i = 0; i < env.n(); ++i) {
        const auto& atom = label_atom[int(env.y(i))];
        bool same = true;
        for (int j = 0; j < 3; ++j) same = same && env.X(i, 5 + j) == atom[j];
        matches += same ? 1 : 0;
    }
    double expect = 1.0 - 0.3 + 0.3 / 5.0;
    double freq = double(matches) / double(env.n());
    double se = std::sqrt(expect * (1 - expect) / double(env.n()));
    CHECK(std::abs(freq - expect) < 3 * se);
}

TEST_CASE("distinct environments use distinct gmm atoms") {
    SemScenario sc = make(ScenarioKind::Gmm, {0.0, 0.0}, 100, 41);
    Generated gen = generate(sc);
    CHECK(gen.multi.environments[0].X(0, 5) != gen.multi.environments[1].X(0, 5));
}

TEST_CASE("generation is bit-identical per seed and differs across seeds") {
    SemScenario a = make(ScenarioKind::Case3, {0.5, 2.0}, 500, 99);
    Generated g1 = generate(a);
    Generated g2 = generate(a);
    for (int e = 0; e < 2; ++e) {
        CHECK((g1.multi.environments[e].X - g2.multi.environments[e].X)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
        CHECK((g1.multi.environments[e].y - g2.multi.environments[e].y)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
    a.seed = 100;
    Generated g3 = generate(a);
    CHECK((g1.multi.environments[0].X - g3.multi.environments[0].X)
              .cwiseAbs()
              .maxCoeff() > 0.0);
}

TEST_CASE("environment ids and default nondescendants are populated") {
    SemScenario sc = make(ScenarioKind::Case1, {0.5, 2.0}, 50, 1);
    Generated gen = generate(sc);
    CHECK(gen.multi.environments[0].env_id == "env0");
    CHECK(gen.multi.environments[1].env_id == "env1");
    CHECK(gen.multi.known_nondescendants == std::vector<Eigen::Index>{0});

    CHECK(default_nondescendants(ScenarioKind::AppendixB1) ==
          std::vector<Eigen::Index>({0, 1}));
    CHECK(default_nondescendants(ScenarioKind::NonIdentifiable) ==
          std::vector<Eigen::Index>({0, 1}));
    CHECK(default_nondescendants(ScenarioKind::Gmm, 5) ==
          std::vector<Eigen::Index>({0, 1, 2, 3, 4}));
}

TEST_CASE("scenario validation rejects bad parameters") {
    CHECK_THROWS_AS(generate(make(ScenarioKind::Case1, {}, 10, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate(make(ScenarioKind::Case1, {0.0}, 10, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate(make(ScenarioKind::Case1, {-1.0}, 10, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate(make(ScenarioKind::Gmm, {1.5}, 10, 1)),
                    std::invalid_argument);
    SemScenario bad_k = make(ScenarioKind::Gmm, {0.1}, 10, 1);
    bad_k.gmm_classes = 1;
    CHECK_THROWS_AS(generate(bad_k), std::invalid_argument);
    CHECK_THROWS_AS(generate(make(ScenarioKind::Case2, {1.0}, 0, 1)),
                    std::invalid_argument);
}

TEST_CASE("kind strings round-trip") {
    for (const char* name : {"case1", "case2", "case3", "case4", "case5",
                             "appendix-b1", "nonidentifiable", "gmm"})
        CHECK(to_string(scenario_kind_from_string(name)) == name);
    CHECK_THROWS_AS(scenario_kind_from_string("case9"), std::invalid_argument);
}

TEST_CASE("do(x1 = 0) on case5 zeroes the outcome mean") {
    SemScenario sc = make(ScenarioKind::Case5, {1.5}, 100000, 7);
    EnvironmentDataset env = apply_do_intervention(sc, 0, 0.0);
    CHECK((env.X.col(0).array() == 0.0).all());
    // y = 2*0 + N(0,1): mean within 3 standard errors of zero.
    double se = 1.0 / std::sqrt(double(env.n()));
    CHECK(std::abs(env.y.mean()) < 3 * se);
}

TEST_CASE("do(x1 = 1) on case2 drives x3 to sin(1) plus noise") {
    SemScenario sc = make(ScenarioKind::Case2, {1.0}, 100000, 13);
    EnvironmentDataset env = apply_do_intervention(sc, 0, 1.0);
    CHECK((env.X.col(0).array() == 1.0).all());
    // x3 = sin(1) + N(0, 1/4): sd 0.5.
    double se = 0.5 / std::sqrt(double(env.n()));
    CHECK(std::abs(env.X.col(1).mean() - std::sin(1.0)) < 3 * se);
}

TEST_CASE("do on x2 pins the column and shifts downstream draws") {
    SemScenario sc = make(ScenarioKind::Case1, {1.0}, 20000, 19);
    EnvironmentDataset e1 = apply_do_intervention(sc, 1, 1.0);
    EnvironmentDataset e2 = apply_do_intervention(sc, 1, 2.0);
    CHECK((e1.X.col(1).array() == 1.0).all());
    CHECK((e2.X.col(1).array() == 2.0).all());
    // y <- 3 x1 + 2 x2 + noise: the do-shift moves E[y] by 2.
    CHECK(e2.y.mean() - e1.y.mean() == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("do intervention rejects unsupported kinds and bad targets") {
    SemScenario b1 = make(ScenarioKind::AppendixB1, {0.5}, 10, 1);
    CHECK_THROWS_AS(apply_do_intervention(b1, 0, 1.0), std::invalid_argument);
    SemScenario c5 = make(ScenarioKind::Case5, {1.0}, 10, 1);
    CHECK_THROWS_AS(apply_do_intervention(c5, 5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(apply_do_intervention(c5, -1, 1.0), std::invalid_argument);
}

TEST_CASE("metadata echoes the scenario and environment constants") {
    SemScenario sc = make(ScenarioKind::Case4, {0.5, 2.0}, 100, 55);
    Generated gen = generate(sc);
    auto j = gen.meta();
    CHECK(j["scenario"]["kind"] == "case4");
    CHECK(j["beta"].size() == 3);
    CHECK(j["environments"].size() == 2);
    // Case 4 draws its per-environment slope m ~ U(1,2).
    double m0 = j["environments"][0]["m"].get<double>();
    CHECK(m0 >= 1.0);
    CHECK(m0 <= 2.0);
    CHECK(j["environments"][0]["env_id"] == "env0");
}
