#pragma once

#include "coco/scenarios.hpp"

#include <nlohmann/json_fwd.hpp>

#include <utility>
#include <vector>

namespace coco {

// Empirical second moments per environment: W^e = X'X/n and b^e = X'y/n.
struct GramStack {
    std::vector<Eigen::MatrixXd> per_env_gram;
    std::vector<Eigen::VectorXd> per_env_cross;

    // Symmetry to 1e-10 and eigenvalues >= -1e-10 on every W^e.
    void validate() const;
};

GramStack gram_stack(const MultiEnvData& multi);

struct PlausibleSolution {
    std::vector<Eigen::Index> subset; // support A, 0-based, ascending
    Eigen::VectorXd alpha;            // zero off A, stationary on A
};

struct PlausibleSet {
    std::vector<PlausibleSolution> solutions; // scan order: |A| then lex
    std::vector<std::vector<Eigen::Index>> skipped; // singular subsets
};

// All stationary points of the single-environment squared risk with the
// Hadamard penalty: one restricted OLS solve per support subset.  Guarded
// to p <= 16.
PlausibleSet plausible_set_enumerate(const EnvironmentDataset& data);

// Vectors from environment 0's enumeration that every other environment
// matches within tol (sup norm, greedy nearest neighbor); each result is
// the centroid of its matched vectors.
std::vector<Eigen::VectorXd> intersect_plausible_sets(const MultiEnvData& multi,
                                                      double tol);

struct InvariantSet {
    std::vector<Eigen::Index> subset; // H, 0-based, ascending
    Eigen::VectorXd alpha;            // padded mean of per-env estimates
};

// Scans nonempty H containing C in (|H|, lex) order; H is invariant when
// the per-environment restricted OLS estimates agree coordinatewise within
// tol across all environment pairs.
std::vector<InvariantSet> invariant_sets(const MultiEnvData& multi,
                                         const std::vector<Eigen::Index>& C,
                                         double tol);

// True iff all invariant vectors agree pairwise within tol: the testable
// form of the effectiveness assumption on the intervention set.
bool check_effectiveness_A2(const MultiEnvData& multi,
                            const std::vector<Eigen::Index>& C, double tol);

struct RankCheck {
    Eigen::Index matrix_rows = 0;
    Eigen::Index rank = 0;
    bool passes = false; // rank == p
};

struct CheckReport {
    std::vector<InvariantSet> invariant_sets;
    bool distinct_invariant_vectors = false;
    RankCheck rank_check;
    Eigen::Index environments_used = 0;

    nlohmann::json to_json() const;
};

// Numerical column rank of the |E|*|C| x p matrix whose rows are the C-rows
// of each environment's Gram matrix.  Each column is scaled by the RMS
// standard error of its entries so that sampling noise has roughly unit
// variance, and singular values are compared against the random-matrix
// noise edge sqrt(rows) + sqrt(p); exact inputs (zero standard errors)
// fall back to a plain relative threshold.  Passes iff the rank is p.
CheckReport ico_rank_check(const MultiEnvData& multi,
                           const std::vector<Eigen::Index>& C);

// Draws environments one at a time from the scenario's intervention family
// (gamma ~ U(0,5) for the five cases, gamma ~ U(1,3) for NonIdentifiable,
// sigma ~ U(0.2,1) for AppendixB1), re-running the rank check after each,
// until it passes or max_envs is reached.  Returns the accumulated data
// and the final report with environments_used set.
std::pair<MultiEnvData, CheckReport> ico_workflow(const SemScenario& scenario,
                                                  const std::vector<Eigen::Index>& C,
                                                  int max_envs);

// Rank check plus, when with_invariants, the invariant-set scan and the
// pairwise-agreement flag; the one-stop report behind the CLI.
CheckReport run_checks(const MultiEnvData& multi, const std::vector<Eigen::Index>& C,
                       double tol, bool with_invariants);

} // namespace coco
