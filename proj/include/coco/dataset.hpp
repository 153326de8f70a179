#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace coco {

// One environment's observations.  Rows = units, columns = covariates
// (causes first, then spurious covariates; see scenarios.hpp).
struct EnvironmentDataset {
    std::string env_id;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> covariate_names;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index p() const { return X.cols(); }

    // Throws std::invalid_argument on any invariant violation:
    // empty data, non-finite entries, name count/uniqueness.
    void validate() const;
};

// All environments share p and covariate_names.  known_nondescendants
// holds 0-based column indices of covariates known a priori not to be
// descendants of the outcome (the mask set used by the modified penalty).
struct MultiEnvData {
    std::vector<EnvironmentDataset> environments;
    std::vector<Eigen::Index> known_nondescendants;

    Eigen::Index p() const {
        return environments.empty() ? 0 : environments.front().p();
    }

    void validate() const;
};

// Ground truth attached to generated scenarios.  beta is empty for the
// classification scenario (Gmm), where only the support is meaningful.
struct TrueCausalModel {
    Eigen::VectorXd beta;
    std::vector<Eigen::Index> support;
};

// support = { j : beta_j != 0 }
std::vector<Eigen::Index> support_of(const Eigen::VectorXd& beta);

} // namespace coco
