#include "coco/scenarios.hpp"

#include "coco/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace coco {

namespace {

// A do-intervention pins one covariate column to a constant; samplers skip
// that variable's own draws but still propagate it downstream.
struct DoOverride {
    Eigen::Index target = -1;
    double value = 0.0;
    bool on(Eigen::Index column) const { return column == target; }
};

using Names = std::vector<std::string>;

EnvironmentDataset make_env(std::string id, Eigen::MatrixXd X, Eigen::VectorXd y,
                            Names names) {
    EnvironmentDataset env;
    env.env_id = std::move(id);
    env.X = std::move(X);
    env.y = std::move(y);
    env.covariate_names = std::move(names);
    env.validate();
    return env;
}

using Constants = std::vector<std::pair<std::string, double>>;

// Case 1: x2 <- N(m2, g^2); x1 <- N(m1, g^2); y <- 3 x1 + 2 x2 + N(0,1);
// z <- g y + N(0, g).  Columns (x1, x2, z), beta = (3, 2, 0).
EnvironmentDataset gen_case1(Rng& rng, Eigen::Index n, double g,
                             const DoOverride& dov, Constants* consts) {
    double m1 = rng.uniform(0.0, 1.0);
    double m2 = rng.uniform(0.0, 1.0);
    if (consts) *consts = {{"gamma", g}, {"m1", m1}, {"m2", m2}};
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x2 = dov.on(1) ? dov.value : rng.normal(m2, g * g);
        double x1 = dov.on(0) ? dov.value : rng.normal(m1, g * g);
        double yi = 3.0 * x1 + 2.0 * x2 + rng.normal();
        double z = dov.on(2) ? dov.value : g * yi + rng.normal(0.0, g);
        X(i, 0) = x1; X(i, 1) = x2; X(i, 2) = z; y(i) = yi;
    }
    return make_env("", std::move(X), std::move(y), {"x1", "x2", "z"});
}

// Case 2: x2 <- N(1, 1/4); x1 <- x2 + U(-1,1); x3 <- sin(x1) + N(0, 1/4);
// y <- 2 x1 + 1.5 x3 + N(0,1); z <- g y + N(0,1).
// Columns (x1, x3, x2, z), beta = (2, 1.5, 0, 0).
EnvironmentDataset gen_case2(Rng& rng, Eigen::Index n, double g,
                             const DoOverride& dov, Constants* consts) {
    if (consts) *consts = {{"gamma", g}};
    Eigen::MatrixXd X(n, 4);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x2 = dov.on(2) ? dov.value : rng.normal(1.0, 0.25);
        double x1 = dov.on(0) ? dov.value : x2 + rng.uniform(-1.0, 1.0);
        double x3 = dov.on(1) ? dov.value : std::sin(x1) + rng.normal(0.0, 0.25);
        double yi = 2.0 * x1 + 1.5 * x3 + rng.normal();
        double z = dov.on(3) ? dov.value : g * yi + rng.normal();
        X(i, 0) = x1; X(i, 1) = x3; X(i, 2) = x2; X(i, 3) = z; y(i) = yi;
    }
    return make_env("", std::move(X), std::move(y), {"x1", "x3", "x2", "z"});
}

// Case 3: same covariate SEM as Case 2; y <- 2 x1 + x2 + 1.5 x3 + N(0, g^2);
// z <- g y + N(0,1).  Columns (x1, x2, x3, z), beta = (2, 1, 1.5, 0).
EnvironmentDataset gen_case3(Rng& rng, Eigen::Index n, double g,
                             const DoOverride& dov, Constants* consts) {
    if (consts) *consts = {{"gamma", g}};
    Eigen::MatrixXd X(n, 4);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x2 = dov.on(1) ? dov.value : rng.normal(1.0, 0.25);
        double x1 = dov.on(0) ? dov.value : x2 + rng.uniform(-1.0, 1.0);
        double x3 = dov.on(2) ? dov.value : std::sin(x1) + rng.normal(0.0, 0.25);
        double yi = 2.0 * x1 + x2 + 1.5 * x3 + rng.normal(0.0, g * g);
        double z = dov.on(3) ? dov.value : g * yi + rng.normal();
        X(i, 0) = x1; X(i, 1) = x2; X(i, 2) = x3; X(i, 3) = z; y(i) = yi;
    }
    return make_env("", std::move(X), std::move(y), {"x1", "x2", "x3", "z"});
}

// Case 4: m ~ U(1,2) per environment; x2 <- N(1, 1/4); x1 <- x2 + U(0,m);
// x3 <- x1 + x2 + N(0, 1/4) stays unobserved; y <- x2 + 2 x3 + N(0,1);
// z <- g y + N(0,1).  Observed columns (x1, x2, z); substituting x3 gives
// y = 2 x1 + 3 x2 + noise, so beta = (2, 3, 0).
EnvironmentDataset gen_case4(Rng& rng, Eigen::Index n, double g,
                             const DoOverride& dov, Constants* consts) {
    double m = rng.uniform(1.0, 2.0);
    if (consts) *consts = {{"gamma", g}, {"m", m}};
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x2 = dov.on(1) ? dov.value : rng.normal(1.0, 0.25);
        double x1 = dov.on(0) ? dov.value : x2 + rng.uniform(0.0, m);
        double x3 = x1 + x2 + rng.normal(0.0, 0.25);
        double yi = x2 + 2.0 * x3 + rng.normal();
        double z = dov.on(2) ? dov.value : g * yi + rng.normal();
        X(i, 0) = x1; X(i, 1) = x2; X(i, 2) = z; y(i) = yi;
    }
    return make_env("", std::move(X), std::move(y), {"x1", "x2", "z"});
}

// Case 5: x1 <- N(1, 1/2); y <- 2 x1 + N(0,1); z <- 0.5 g y + 0.5 x1 + N(0,1).
// Columns (x1, z), beta = (2, 0).
EnvironmentDataset gen_case5(Rng& rng, Eigen::Index n, double g,
                             const DoOverride& dov, Constants* consts) {
    if (consts) *consts = {{"gamma", g}};
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x1 = dov.on(0) ? dov.value : rng.normal(1.0, 0.5);
        double yi = 2.0 * x1 + rng.normal();
        double z = dov.on(1) ? dov.value : 0.5 * g * yi + 0.5 * x1 + rng.normal();
        X(i, 0) = x1; X(i, 1) = z; y(i) = yi;
    }
    return make_env("", std::move(X), std::move(y), {"x1", "z"});
}

// Analytic example: x1, x2, e1, e2 ~ N(0, s^2); y <- x1 + x2 + e1 + e2;
// z1 <- x1 + e1 + N(0,1); z2 <- x2 + e2 + N(0,1).
// Columns (x1, x2, z1, z2), beta = (1, 1, 0, 0).
EnvironmentDataset gen_b1(Rng& rng, Eigen::Index n, double sigma,
                          Constants* consts) {
    if (consts) *consts = {{"sigma", sigma}};
    double v = sigma * sigma;
    Eigen::MatrixXd X(n, 4);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x1 = rng.normal(0.0, v);
        double x2 = rng.normal(0.0, v);
        double e1 = rng.normal(0.0, v);
        double e2 = rng.normal(0.0, v);
        double yi = x1 + x2 + e1 + e2;
        double z1 = x1 + e1 + rng.normal();
        double z2 = x2 + e2 + rng.normal();
        X(i, 0) = x1; X(i, 1) = x2; X(i, 2) = z1; X(i, 3) = z2; y(i) = yi;
    }
    return make_env("", std::move(X), std::move(y), {"x1", "x2", "z1", "z2"});
}

// Ineffective-intervention family: x2 <- N(0, (g/2)^2); x1 <- x2 + U(-g,g) + 1;
// y <- 2 x1 + 1.5 x2 + N(0,1); x3 <- 0.5 y + N(0,1).
// Columns (x1, x2, x3), beta = (2, 1.5, 0); (1.6, 1.2, 0.4) is risk-optimal
// in every environment of the family.
EnvironmentDataset gen_nonident(Rng& rng, Eigen::Index n, double g,
                                Constants* consts) {
    if (consts) *consts = {{"gamma", g}};
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x2 = rng.normal(0.0, 0.25 * g * g);
        double x1 = x2 + rng.uniform(-g, g) + 1.0;
        double yi = 2.0 * x1 + 1.5 * x2 + rng.normal();
        double x3 = 0.5 * yi + rng.normal();
        X(i, 0) = x1; X(i, 1) = x2; X(i, 2) = x3; y(i) = yi;
    }
    return make_env("", std::move(X), std::move(y), {"x1", "x2", "x3"});
}

// Mixture classification: component c uniform on {0..K-1}; x ~ N(mu_c, I_K)
// with mu_k = sqrt(1.5 K) e_k; the label is re-sampled from the posterior
// p(k|x), so p(y|x) is invariant across environments.  z copies the label's
// per-environment atom u_y except with probability p, where it copies a
// uniformly random atom.  Columns (x1..xK, z1..zm), m = ceil(K/2).
EnvironmentDataset gen_gmm(Rng& rng, Eigen::Index n, double p_corrupt, int K,
                           Constants* consts) {
    int zdim = (K + 1) / 2;
    double mu = std::sqrt(1.5 * K);
    std::vector<std::vector<double>> u(K, std::vector<double>(zdim));
    if (consts) consts->push_back({"p", p_corrupt});
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < zdim; ++j) {
            u[k][j] = rng.next_double();
            if (consts)
                consts->push_back({"u" + std::to_string(k + 1) + "_" + std::to_string(j + 1),
                                   u[k][j]});
        }
    Eigen::MatrixXd X(n, K + zdim);
    Eigen::VectorXd y(n);
    std::vector<double> logits(K), probs(K);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto c = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
        for (int j = 0; j < K; ++j)
            X(i, j) = (j == c ? mu : 0.0) + rng.normal();
        // Posterior over components; the -|mu_k|^2/2 terms are equal here
        // but kept so the expression stays correct for general means.
        double mx = -1e300;
        for (int k = 0; k < K; ++k) {
            logits[k] = mu * X(i, k) - 0.5 * mu * mu;
            mx = std::max(mx, logits[k]);
        }
        for (int k = 0; k < K; ++k) probs[k] = std::exp(logits[k] - mx);
        auto label = static_cast<int>(rng.categorical(probs));
        y(i) = label;
        int src = label;
        if (p_corrupt > 0.0 && rng.next_double() < p_corrupt)
            src = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
        for (int j = 0; j < zdim; ++j) X(i, K + j) = u[src][j];
    }
    Names names;
    for (int k = 1; k <= K; ++k) names.push_back("x" + std::to_string(k));
    for (int j = 1; j <= zdim; ++j) names.push_back("z" + std::to_string(j));
    return make_env("", std::move(X), std::move(y), std::move(names));
}

Eigen::VectorXd true_beta(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::Case1: return Eigen::Vector3d(3, 2, 0);
        case ScenarioKind::Case2: return Eigen::Vector4d(2, 1.5, 0, 0);
        case ScenarioKind::Case3: return Eigen::Vector4d(2, 1, 1.5, 0);
        case ScenarioKind::Case4: return Eigen::Vector3d(2, 3, 0);
        case ScenarioKind::Case5: return Eigen::Vector2d(2, 0);
        case ScenarioKind::AppendixB1: return Eigen::Vector4d(1, 1, 0, 0);
        case ScenarioKind::NonIdentifiable: return Eigen::Vector3d(2, 1.5, 0);
        case ScenarioKind::Gmm: return {};
    }
    throw std::logic_error("true_beta: unknown kind");
}

EnvironmentDataset sample_env(const SemScenario& sc, int env_index,
                              const DoOverride& dov, Constants* consts) {
    Rng rng = Rng(sc.seed).child(static_cast<std::uint64_t>(env_index));
    double par = sc.env_params.at(static_cast<std::size_t>(env_index));
    Eigen::Index n = sc.n_per_env;
    EnvironmentDataset env;
    switch (sc.kind) {
        case ScenarioKind::Case1: env = gen_case1(rng, n, par, dov, consts); break;
        case ScenarioKind::Case2: env = gen_case2(rng, n, par, dov, consts); break;
        case ScenarioKind::Case3: env = gen_case3(rng, n, par, dov, consts); break;
        case ScenarioKind::Case4: env = gen_case4(rng, n, par, dov, consts); break;
        case ScenarioKind::Case5: env = gen_case5(rng, n, par, dov, consts); break;
        case ScenarioKind::AppendixB1: env = gen_b1(rng, n, par, consts); break;
        case ScenarioKind::NonIdentifiable: env = gen_nonident(rng, n, par, consts); break;
        case ScenarioKind::Gmm: env = gen_gmm(rng, n, par, sc.gmm_classes, consts); break;
    }
    env.env_id = "env" + std::to_string(env_index);
    return env;
}

} // namespace

ScenarioKind scenario_kind_from_string(const std::string& s) {
    if (s == "case1") return ScenarioKind::Case1;
    if (s == "case2") return ScenarioKind::Case2;
    if (s == "case3") return ScenarioKind::Case3;
    if (s == "case4") return ScenarioKind::Case4;
    if (s == "case5") return ScenarioKind::Case5;
    if (s == "appendix-b1" || s == "b1") return ScenarioKind::AppendixB1;
    if (s == "nonidentifiable" || s == "noident") return ScenarioKind::NonIdentifiable;
    if (s == "gmm") return ScenarioKind::Gmm;
    throw std::invalid_argument("unknown scenario kind: " + s);
}

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::Case1: return "case1";
        case ScenarioKind::Case2: return "case2";
        case ScenarioKind::Case3: return "case3";
        case ScenarioKind::Case4: return "case4";
        case ScenarioKind::Case5: return "case5";
        case ScenarioKind::AppendixB1: return "appendix-b1";
        case ScenarioKind::NonIdentifiable: return "nonidentifiable";
        case ScenarioKind::Gmm: return "gmm";
    }
    throw std::logic_error("to_string: unknown kind");
}

void SemScenario::validate() const {
    if (env_params.empty())
        throw std::invalid_argument("scenario: env_params must be non-empty");
    if (n_per_env < 1)
        throw std::invalid_argument("scenario: n_per_env must be >= 1");
    if (kind == ScenarioKind::Gmm) {
        if (gmm_classes < 2)
            throw std::invalid_argument("scenario: gmm needs K >= 2");
        for (double p : env_params)
            if (!(p >= 0.0 && p <= 1.0))
                throw std::invalid_argument("scenario: gmm corruption p must be in [0,1]");
    }
    if (kind == ScenarioKind::Case1)
        for (double g : env_params)
            if (!(g > 0.0))
                throw std::invalid_argument(
                    "scenario: case1 needs gamma > 0 (z noise variance is gamma)");
    if (kind == ScenarioKind::NonIdentifiable)
        for (double g : env_params)
            if (!(g > 0.0))
                throw std::invalid_argument("scenario: nonidentifiable needs gamma > 0");
}

std::vector<Eigen::Index> default_nondescendants(ScenarioKind kind, int gmm_classes) {
    switch (kind) {
        case ScenarioKind::Case1:
        case ScenarioKind::Case2:
        case ScenarioKind::Case3:
        case ScenarioKind::Case4:
        case ScenarioKind::Case5: return {0};
        case ScenarioKind::AppendixB1:
        case ScenarioKind::NonIdentifiable: return {0, 1};
        case ScenarioKind::Gmm: {
            std::vector<Eigen::Index> c;
            for (int k = 0; k < gmm_classes; ++k) c.push_back(k);
            return c;
        }
    }
    throw std::logic_error("default_nondescendants: unknown kind");
}

Generated generate(const SemScenario& scenario) {
    scenario.validate();
    Generated out;
    out.scenario = scenario;
    for (std::size_t e = 0; e < scenario.env_params.size(); ++e) {
        Constants consts;
        out.multi.environments.push_back(
            sample_env(scenario, static_cast<int>(e), DoOverride{}, &consts));
        out.env_constants.push_back(std::move(consts));
    }
    out.multi.known_nondescendants =
        default_nondescendants(scenario.kind, scenario.gmm_classes);
    out.truth.beta = true_beta(scenario.kind);
    if (scenario.kind == ScenarioKind::Gmm)
        for (int k = 0; k < scenario.gmm_classes; ++k) out.truth.support.push_back(k);
    else
        out.truth.support = support_of(out.truth.beta);
    out.multi.validate();
    return out;
}

EnvironmentDataset apply_do_intervention(const SemScenario& scenario,
                                         Eigen::Index target, double value) {
    scenario.validate();
    switch (scenario.kind) {
        case ScenarioKind::Case1:
        case ScenarioKind::Case2:
        case ScenarioKind::Case3:
        case ScenarioKind::Case4:
        case ScenarioKind::Case5: break;
        default:
            throw std::invalid_argument(
                "apply_do_intervention: structural regeneration is supported for case1..case5");
    }
    Eigen::Index p = true_beta(scenario.kind).size();
    if (target < 0 || target >= p)
        throw std::invalid_argument("apply_do_intervention: target out of range");
    DoOverride dov;
    dov.target = target;
    dov.value = value;
    return sample_env(scenario, 0, dov, nullptr);
}

nlohmann::json Generated::meta() const {
    nlohmann::json j;
    j["scenario"] = {
        {"kind", to_string(scenario.kind)},
        {"n_per_env", scenario.n_per_env},
        {"seed", scenario.seed},
        {"env_params", scenario.env_params},
    };
    if (scenario.kind == ScenarioKind::Gmm) j["scenario"]["gmm_classes"] = scenario.gmm_classes;
    j["beta"] = std::vector<double>(truth.beta.data(), truth.beta.data() + truth.beta.size());
    j["support"] = truth.support;
    if (!multi.environments.empty())
        j["covariates"] = multi.environments.front().covariate_names;
    j["nondescendants"] = multi.known_nondescendants;
    nlohmann::json envs = nlohmann::json::array();
    for (std::size_t e = 0; e < env_constants.size(); ++e) {
        nlohmann::json je;
        je["env_id"] = multi.environments[e].env_id;
        for (const auto& [k, v] : env_constants[e]) je[k] = v;
        envs.push_back(je);
    }
    j["environments"] = envs;
    return j;
}

} // namespace coco
