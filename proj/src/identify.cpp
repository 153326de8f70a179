#include "coco/identify.hpp"

#include "coco/objectives.hpp"
#include "coco/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace coco {

namespace {

constexpr double kMaxCondition = 1e12;
constexpr Eigen::Index kMaxScanP = 16;

void check_indices(const std::vector<Eigen::Index>& C, Eigen::Index p,
                   const char* who) {
    for (auto j : C)
        if (j < 0 || j >= p)
            throw std::invalid_argument(std::string(who) + ": index out of range");
}

// Subsets of {0..p-1} that contain `core`, smallest first, ties broken
// lexicographically; the deterministic scan order of every report.
std::vector<std::vector<Eigen::Index>> subsets_in_scan_order(
    Eigen::Index p, const std::vector<Eigen::Index>& core, bool include_empty) {
    if (p > kMaxScanP)
        throw std::invalid_argument("subset scan: p must be <= 16");
    std::uint32_t core_mask = 0;
    for (auto j : core) core_mask |= 1u << j;
    std::vector<std::vector<Eigen::Index>> out;
    auto total = std::uint64_t{1} << p;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        if ((mask & core_mask) != core_mask) continue;
        if (mask == 0 && !include_empty) continue;
        std::vector<Eigen::Index> subset;
        for (Eigen::Index j = 0; j < p; ++j)
            if (mask & (std::uint64_t{1} << j)) subset.push_back(j);
        out.push_back(std::move(subset));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    });
    return out;
}

// Restricted normal-equation solve on the coordinates of `subset`; empty
// optional-like flag via the bool.  Padded to full length with zeros.
bool restricted_ols(const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                    const std::vector<Eigen::Index>& subset, Eigen::VectorXd& out) {
    auto k = static_cast<Eigen::Index>(subset.size());
    out = Eigen::VectorXd::Zero(W.rows());
    if (k == 0) return true;
    Eigen::MatrixXd Ws(k, k);
    Eigen::VectorXd bs(k);
    for (Eigen::Index r = 0; r < k; ++r) {
        bs(r) = b(subset[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < k; ++c)
            Ws(r, c) = W(subset[static_cast<std::size_t>(r)],
                         subset[static_cast<std::size_t>(c)]);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ws, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    double smin = sv(sv.size() - 1);
    if (!(smin > 0) || !(sv(0) / smin < kMaxCondition)) return false;
    Eigen::VectorXd sol = svd.solve(bs);
    for (Eigen::Index r = 0; r < k; ++r) out(subset[static_cast<std::size_t>(r)]) = sol(r);
    return true;
}

double sup_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

// One row of the stacked check matrix per (environment, i in C): the mean
// per-sample products x_i * x_j, with their standard errors.
void append_check_rows(const EnvironmentDataset& env, const std::vector<Eigen::Index>& C,
                       std::vector<Eigen::RowVectorXd>& rows,
                       std::vector<Eigen::RowVectorXd>& ses) {
    Eigen::Index n = env.n();
    Eigen::Index p = env.p();
    auto nd = static_cast<double>(n);
    for (auto i : C) {
        Eigen::RowVectorXd mean(p), se(p);
        for (Eigen::Index j = 0; j < p; ++j) {
            Eigen::VectorXd prod = env.X.col(i).cwiseProduct(env.X.col(j));
            double m = prod.mean();
            mean(j) = m;
            se(j) = n < 2 ? 0.0
                          : std::sqrt((prod.array() - m).matrix().squaredNorm() /
                                      (nd - 1.0) / nd);
        }
        rows.push_back(std::move(mean));
        ses.push_back(std::move(se));
    }
}

RankCheck rank_from_rows(const std::vector<Eigen::RowVectorXd>& rows,
                         const std::vector<Eigen::RowVectorXd>& ses,
                         Eigen::Index p) {
    RankCheck rc;
    rc.matrix_rows = static_cast<Eigen::Index>(rows.size());
    if (rows.empty()) return rc;
    Eigen::Index R = rc.matrix_rows;
    Eigen::MatrixXd M(R, p), S(R, p);
    for (Eigen::Index r = 0; r < R; ++r) {
        M.row(r) = rows[static_cast<std::size_t>(r)];
        S.row(r) = ses[static_cast<std::size_t>(r)];
    }
    double maxdim = static_cast<double>(std::max(R, p));
    double eps_edge = std::ldexp(1.0, -40);
    Eigen::VectorXd d = (S.array().square().colwise().mean()).sqrt();
    double dmax = d.maxCoeff();
    double mscale = M.cwiseAbs().maxCoeff();
    Eigen::VectorXd sv;
    double tau;
    if (dmax <= 1e-12 * std::max(1.0, mscale)) {
        // Exact second moments: plain relative thresholds suffice.
        sv = Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues();
        tau = std::max(sv(0) * maxdim * eps_edge, 1e-6 * sv(0));
    } else {
        // Column-whitened statistic: dividing column j by the RMS standard
        // error of its entries makes sampling noise roughly unit variance,
        // so pure-noise singular values sit below sqrt(R) + sqrt(p).
        Eigen::VectorXd dc = d.cwiseMax(1e-12 * dmax);
        Eigen::MatrixXd Mw = M * dc.cwiseInverse().asDiagonal();
        sv = Eigen::JacobiSVD<Eigen::MatrixXd>(Mw).singularValues();
        double edge = std::sqrt(static_cast<double>(R)) +
                      std::sqrt(static_cast<double>(p));
        tau = std::max({edge, sv(0) * maxdim * eps_edge, 1e-6 * sv(0)});
    }
    rc.rank = (sv.array() > tau).count();
    rc.passes = rc.rank == p;
    return rc;
}

bool vectors_agree(const std::vector<InvariantSet>& sets, double tol) {
    for (std::size_t a = 0; a < sets.size(); ++a)
        for (std::size_t b = a + 1; b < sets.size(); ++b)
            if (sup_distance(sets[a].alpha, sets[b].alpha) >= tol) return false;
    return true;
}

} // namespace

void GramStack::validate() const {
    if (per_env_gram.size() != per_env_cross.size())
        throw std::invalid_argument("gram stack: gram/cross counts differ");
    for (std::size_t e = 0; e < per_env_gram.size(); ++e) {
        const auto& W = per_env_gram[e];
        if (W.rows() != W.cols() || W.rows() != per_env_cross[e].size())
            throw std::invalid_argument("gram stack: shape mismatch");
        if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-10)
            throw std::invalid_argument("gram stack: W not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(W);
        if (eig.eigenvalues().minCoeff() < -1e-10)
            throw std::invalid_argument("gram stack: W not positive semidefinite");
    }
}

GramStack gram_stack(const MultiEnvData& multi) {
    multi.validate();
    GramStack gs;
    for (const auto& env : multi.environments) {
        GramSummary G = gram_summary(env);
        gs.per_env_gram.push_back(std::move(G.W));
        gs.per_env_cross.push_back(std::move(G.b));
    }
    return gs;
}

PlausibleSet plausible_set_enumerate(const EnvironmentDataset& data) {
    data.validate();
    Eigen::Index p = data.p();
    if (p > kMaxScanP)
        throw std::invalid_argument("plausible set enumeration: p must be <= 16");
    GramSummary G = gram_summary(data);
    PlausibleSet out;
    for (auto& subset : subsets_in_scan_order(p, {}, true)) {
        Eigen::VectorXd alpha;
        if (restricted_ols(G.W, G.b, subset, alpha))
            out.solutions.push_back({std::move(subset), std::move(alpha)});
        else
            out.skipped.push_back(std::move(subset));
    }
    return out;
}

std::vector<Eigen::VectorXd> intersect_plausible_sets(const MultiEnvData& multi,
                                                      double tol) {
    multi.validate();
    if (!(tol > 0)) throw std::invalid_argument("intersect: tol must be > 0");
    std::vector<PlausibleSet> sets;
    for (const auto& env : multi.environments)
        sets.push_back(plausible_set_enumerate(env));
    std::vector<Eigen::VectorXd> out;
    for (const auto& cand : sets[0].solutions) {
        Eigen::VectorXd centroid = cand.alpha;
        bool matched_all = true;
        for (std::size_t e = 1; e < sets.size(); ++e) {
            double best = std::numeric_limits<double>::infinity();
            const Eigen::VectorXd* best_vec = nullptr;
            for (const auto& sol : sets[e].solutions) {
                double dist = sup_distance(cand.alpha, sol.alpha);
                if (dist < best) {
                    best = dist;
                    best_vec = &sol.alpha;
                }
            }
            if (best_vec == nullptr || best > tol) {
                matched_all = false;
                break;
            }
            centroid += *best_vec;
        }
        if (matched_all)
            out.push_back(centroid / static_cast<double>(sets.size()));
    }
    return out;
}

std::vector<InvariantSet> invariant_sets(const MultiEnvData& multi,
                                         const std::vector<Eigen::Index>& C,
                                         double tol) {
    multi.validate();
    if (!(tol > 0)) throw std::invalid_argument("invariant sets: tol must be > 0");
    Eigen::Index p = multi.p();
    check_indices(C, p, "invariant sets");
    GramStack gs = gram_stack(multi);
    auto m = gs.per_env_gram.size();
    std::vector<InvariantSet> out;
    for (auto& subset : subsets_in_scan_order(p, C, false)) {
        std::vector<Eigen::VectorXd> est(m);
        for (std::size_t e = 0; e < m; ++e)
            if (!restricted_ols(gs.per_env_gram[e], gs.per_env_cross[e], subset, est[e]))
                throw std::runtime_error(
                    "invariant sets: singular restricted Gram matrix");
        double worst = 0.0;
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a + 1; b < m; ++b)
                worst = std::max(worst, sup_distance(est[a], est[b]));
        if (worst < tol) {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
            for (const auto& v : est) mean += v;
            out.push_back({std::move(subset), mean / static_cast<double>(m)});
        }
    }
    return out;
}

bool check_effectiveness_A2(const MultiEnvData& multi,
                            const std::vector<Eigen::Index>& C, double tol) {
    return vectors_agree(invariant_sets(multi, C, tol), tol);
}

CheckReport ico_rank_check(const MultiEnvData& multi,
                           const std::vector<Eigen::Index>& C) {
    multi.validate();
    if (C.empty()) throw std::invalid_argument("rank check: C must be non-empty");
    check_indices(C, multi.p(), "rank check");
    std::vector<Eigen::RowVectorXd> rows, ses;
    for (const auto& env : multi.environments) append_check_rows(env, C, rows, ses);
    CheckReport report;
    report.rank_check = rank_from_rows(rows, ses, multi.p());
    report.environments_used = static_cast<Eigen::Index>(multi.environments.size());
    return report;
}

std::pair<MultiEnvData, CheckReport> ico_workflow(const SemScenario& scenario,
                                                  const std::vector<Eigen::Index>& C,
                                                  int max_envs) {
    if (max_envs < 1) throw std::invalid_argument("ico workflow: max_envs must be >= 1");
    if (C.empty()) throw std::invalid_argument("ico workflow: C must be non-empty");
    double lo = 0.0, hi = 0.0;
    switch (scenario.kind) {
        case ScenarioKind::Case1:
        case ScenarioKind::Case2:
        case ScenarioKind::Case3:
        case ScenarioKind::Case4:
        case ScenarioKind::Case5:
            lo = 0.0, hi = 5.0;
            break;
        case ScenarioKind::NonIdentifiable:
            lo = 1.0, hi = 3.0;
            break;
        case ScenarioKind::AppendixB1:
            lo = 0.2, hi = 1.0;
            break;
        case ScenarioKind::Gmm:
            throw std::invalid_argument("ico workflow: no intervention family for gmm");
    }

    Rng param_rng = Rng(scenario.seed).child(0xA001);
    Rng seed_rng = Rng(scenario.seed).child(0xA002);
    MultiEnvData acc;
    std::vector<Eigen::RowVectorXd> rows, ses;
    CheckReport report;
    for (int e = 0; e < max_envs; ++e) {
        SemScenario one = scenario;
        one.env_params = {param_rng.uniform(lo, hi)};
        one.seed = seed_rng.next_u64();
        Generated g = generate(one);
        EnvironmentDataset env = std::move(g.multi.environments[0]);
        env.env_id = "env" + std::to_string(e);
        if (acc.environments.empty())
            acc.known_nondescendants = g.multi.known_nondescendants;
        check_indices(C, env.p(), "ico workflow");
        append_check_rows(env, C, rows, ses);
        acc.environments.push_back(std::move(env));
        report.rank_check = rank_from_rows(rows, ses, acc.p());
        report.environments_used = static_cast<Eigen::Index>(acc.environments.size());
        if (report.rank_check.passes) break;
    }
    return {std::move(acc), std::move(report)};
}

CheckReport run_checks(const MultiEnvData& multi, const std::vector<Eigen::Index>& C,
                       double tol, bool with_invariants) {
    CheckReport report = ico_rank_check(multi, C);
    if (with_invariants) {
        report.invariant_sets = invariant_sets(multi, C, tol);
        report.distinct_invariant_vectors = !vectors_agree(report.invariant_sets, tol);
    }
    return report;
}

nlohmann::json CheckReport::to_json() const {
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& s : invariant_sets) {
        nlohmann::json item;
        item["subset"] = s.subset;
        item["vector"] = std::vector<double>(s.alpha.data(), s.alpha.data() + s.alpha.size());
        sets.push_back(std::move(item));
    }
    return nlohmann::json{
        {"invariant_sets", std::move(sets)},
        {"distinct_invariant_vectors", distinct_invariant_vectors},
        {"rank_check",
         {{"matrix_rows", rank_check.matrix_rows},
          {"rank", rank_check.rank},
          {"passes", rank_check.passes}}},
        {"environments_used", environments_used},
    };
}

} // namespace coco
