#pragma once

#include "coco/scenarios.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace coco {

// One (scenario, method) row of the linear-cases table.  `hyper` is the
// selected penalty weight (0 when the method has none); per_rep holds the
// replication MAEs behind mean/sd.
struct MaeCell {
    std::string scenario;
    std::string method;
    double hyper = 0.0;
    int reps = 0;
    std::vector<double> per_rep;
    double mean = 0.0;
    double sd = 0.0;
    std::string error; // non-empty when every replication failed
};

// One method row of the mixture-model table; accuracies are percentages.
struct AccuracyCell {
    std::string method;
    double hyper = 0.0;
    double train = 0.0;
    double validation = 0.0;
    double test = 0.0;
    std::string error;
};

// One labeled coefficient row of the analytic-example table.
struct CoeffRow {
    std::string label;
    std::vector<double> estimate;
    std::vector<double> reference;
    double max_abs_dev = 0.0;
};

struct BenchReport {
    std::string suite;
    std::vector<MaeCell> mae;
    std::vector<AccuracyCell> accuracy;
    std::vector<CoeffRow> coeffs;
    std::string meta_text; // JSON object with seeds, sizes, knobs

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

struct BenchOptions {
    std::string suite = "linear-cases"; // linear-cases | gmm | appendix-b1
    std::uint64_t seed = 0;
    int threads = 0; // 0 = hardware concurrency
    // Display-name filter ("erm", "irmv1", "vrex", "coco", "naive-coco",
    // "oracle"); empty runs the suite's full method set.
    std::vector<std::string> methods;

    // linear-cases and appendix-b1
    long n = 10000;
    int reps = 10;
    std::vector<double> gammas = {0.5, 2.0};
    std::vector<double> irm_lambdas = {2.0, 20.0, 200.0};
    long linear_iters = 50000;
    double linear_eta = 0.1;
    double linear_tol = 1e-9;

    // gmm: the frozen configuration behind the reported table
    long gmm_n = 1000;
    Eigen::Index gmm_width = 10;
    long gmm_erm_iters = 100000;
    long gmm_oracle_iters = 10000;
    long gmm_coco_iters = 10000;
    double gmm_erm_eta = 1.0;
    double gmm_coco_eta = 0.1;
    double gmm_init_sd = 0.1;
    int gmm_lambda_count = 10; // log-spaced on [lambda_lo, lambda_hi]
    double gmm_lambda_lo = 1.0;
    double gmm_lambda_hi = 100.0;
    bool gmm_sweep = true;        // false: run coco at gmm_coco_lambda only
    double gmm_coco_lambda = 3.0; // pre-validated default
};

// Dispatches on opts.suite.  Cells run in a work pool with per-cell seeds,
// so thread count does not change any number; per-cell failures are
// recorded in the row and the suite continues.
BenchReport run_bench(const BenchOptions& opts);

BenchReport run_linear_cases(const BenchOptions& opts);
BenchReport run_gmm(const BenchOptions& opts);
BenchReport run_appendix_b1(const BenchOptions& opts);

} // namespace coco
