#pragma once

#include "coco/dataset.hpp"

#include <string>
#include <vector>

namespace coco {

// One CSV per environment: header row, first column "y", remaining columns
// are covariates.  All files must share an identical header.  Cells must be
// plain finite numbers; "NaN"/"inf" and non-numeric cells are rejected.
// env_id is the file stem.
MultiEnvData load_csv(const std::vector<std::string>& paths,
                      std::vector<Eigen::Index> nondescendants = {});

// RFC-4180 output with a (y, covariates...) header.  Values are written
// with enough digits to round-trip doubles exactly.
void save_csv(const EnvironmentDataset& env, const std::string& path);

// Minimal RFC-4180 helpers shared with the report writer.
std::string csv_quote(const std::string& field);
std::vector<std::string> csv_split_line(const std::string& line);

} // namespace coco
