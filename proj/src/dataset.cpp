#include "coco/dataset.hpp"

#include <stdexcept>
#include <unordered_set>

namespace coco {

void EnvironmentDataset::validate() const {
    if (X.rows() < 1 || X.cols() < 1)
        throw std::invalid_argument("dataset: need n >= 1 and p >= 1");
    if (y.size() != X.rows())
        throw std::invalid_argument("dataset: y length must match X rows");
    if (!X.allFinite() || !y.allFinite())
        throw std::invalid_argument("dataset: non-finite entries");
    if (static_cast<Eigen::Index>(covariate_names.size()) != X.cols())
        throw std::invalid_argument("dataset: covariate_names length must equal p");
    std::unordered_set<std::string> seen;
    for (const auto& name : covariate_names)
        if (!seen.insert(name).second)
            throw std::invalid_argument("dataset: duplicate covariate name: " + name);
}

void MultiEnvData::validate() const {
    if (environments.empty())
        throw std::invalid_argument("multi-env: need at least one environment");
    const auto& first = environments.front();
    for (const auto& env : environments) {
        env.validate();
        if (env.p() != first.p() || env.covariate_names != first.covariate_names)
            throw std::invalid_argument("multi-env: environments disagree on covariates");
    }
    for (auto j : known_nondescendants)
        if (j < 0 || j >= first.p())
            throw std::invalid_argument("multi-env: nondescendant index out of range");
}

std::vector<Eigen::Index> support_of(const Eigen::VectorXd& beta) {
    std::vector<Eigen::Index> s;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
        if (beta(j) != 0.0) s.push_back(j);
    return s;
}

} // namespace coco
