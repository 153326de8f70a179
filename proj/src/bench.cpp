#include "coco/bench.hpp"

#include "coco/csv.hpp"
#include "coco/optimizer.hpp"
#include "coco/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace coco {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void run_pool(std::vector<std::function<void()>>& tasks, int threads) {
    if (threads <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        threads = hw == 0 ? 2 : static_cast<int>(hw);
    }
    threads = std::min<int>(threads, static_cast<int>(tasks.size()));
    if (threads <= 1) {
        for (auto& t : tasks) t();
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            tasks[i]();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? kNaN : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

bool wanted(const BenchOptions& opts, const std::string& method) {
    if (opts.methods.empty()) return true;
    return std::find(opts.methods.begin(), opts.methods.end(), method) !=
           opts.methods.end();
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

// ---- linear-cases suite ----

struct LinearJob {
    ScenarioKind kind;
    std::string scenario;
    std::string method; // display name
    double hyper = 0.0;
    int rep = 0;
    std::uint64_t data_seed = 0;
    double mae = kNaN;
    std::string error;
};

double linear_cell_mae(const LinearJob& job, const BenchOptions& opts) {
    SemScenario sc;
    sc.kind = job.kind;
    sc.env_params = opts.gammas;
    sc.n_per_env = opts.n;
    sc.seed = job.data_seed;
    Generated gen = generate(sc);
    ModelParams pooled = fit_ols_closed_form(gen.multi);
    Eigen::VectorXd est;
    if (job.method == "erm") {
        // The multi-environment mean squared risk is minimized exactly by
        // the pooled normal equations.
        est = pooled.theta;
    } else {
        ObjectiveSpec obj;
        if (job.method == "coco") obj.method = Method::CocoModified;
        else if (job.method == "naive-coco") obj.method = Method::NaiveCoco;
        else if (job.method == "irmv1") obj.method = Method::Irmv1;
        else if (job.method == "vrex") obj.method = Method::Vrex;
        else throw std::invalid_argument("unknown linear method: " + job.method);
        obj.lambda = job.method == "irmv1" ? job.hyper : 0.0;
        obj.lambda_vrex = job.method == "vrex" ? job.hyper : 0.0;
        OptimConfig oc;
        oc.step_size = opts.linear_eta;
        oc.max_iters = opts.linear_iters;
        oc.tol = opts.linear_tol;
        oc.outer_grad = OuterGrad::Analytic;
        oc.init = InitKind::GivenVector;
        oc.init_vector = pooled.theta;
        FitResult fr = fit(gen.multi, RiskSpec{Loss::Squared}, obj, oc,
                           ModelShape::linear(gen.multi.p()));
        est = fr.params.theta;
    }
    return (est - gen.truth.beta).cwiseAbs().mean();
}

BenchReport aggregate_linear(const std::vector<LinearJob>& jobs,
                             const std::vector<std::string>& scenario_order,
                             const std::vector<std::string>& method_order,
                             const BenchOptions& opts) {
    BenchReport report;
    report.suite = "linear-cases";
    for (const auto& scen : scenario_order) {
        for (const auto& meth : method_order) {
            // Group replications by hyper value, then keep the best mean.
            std::vector<double> hypers;
            for (const auto& j : jobs)
                if (j.scenario == scen && j.method == meth &&
                    std::find(hypers.begin(), hypers.end(), j.hyper) == hypers.end())
                    hypers.push_back(j.hyper);
            MaeCell best;
            std::string last_error;
            bool have = false;
            for (double h : hypers) {
                MaeCell cell;
                cell.scenario = scen;
                cell.method = meth;
                cell.hyper = h;
                for (const auto& j : jobs) {
                    if (j.scenario != scen || j.method != meth || j.hyper != h)
                        continue;
                    ++cell.reps;
                    if (j.error.empty()) cell.per_rep.push_back(j.mae);
                    else last_error = j.error;
                }
                if (cell.per_rep.empty()) continue;
                cell.mean = mean_of(cell.per_rep);
                cell.sd = sd_of(cell.per_rep);
                if (!have || cell.mean < best.mean) {
                    best = std::move(cell);
                    have = true;
                }
            }
            if (!have) {
                best.scenario = scen;
                best.method = meth;
                best.error = last_error.empty() ? "no successful replication"
                                                : last_error;
            }
            report.mae.push_back(std::move(best));
        }
    }
    nlohmann::json meta{
        {"seed", opts.seed},      {"n_per_env", opts.n},
        {"reps", opts.reps},      {"gammas", opts.gammas},
        {"irm_lambdas", opts.irm_lambdas},
        {"optimizer", {{"eta", opts.linear_eta},
                       {"max_iters", opts.linear_iters},
                       {"tol", opts.linear_tol},
                       {"init", "pooled-ols"}}},
    };
    report.meta_text = meta.dump();
    return report;
}

BenchReport linear_suite(const BenchOptions& opts) {
    std::vector<std::pair<ScenarioKind, std::string>> cases = {
        {ScenarioKind::Case1, "case1"}, {ScenarioKind::Case2, "case2"},
        {ScenarioKind::Case3, "case3"}, {ScenarioKind::Case4, "case4"},
        {ScenarioKind::Case5, "case5"},
    };
    std::vector<std::string> method_order;
    for (const char* m : {"erm", "irmv1", "vrex", "coco", "naive-coco"})
        if (wanted(opts, m)) method_order.push_back(m);

    std::vector<LinearJob> jobs;
    Rng master(opts.seed);
    for (std::size_t c = 0; c < cases.size(); ++c) {
        Rng case_stream = master.child(100 + c);
        std::vector<std::uint64_t> rep_seeds;
        for (int rep = 0; rep < opts.reps; ++rep)
            rep_seeds.push_back(case_stream.child(static_cast<std::uint64_t>(rep))
                                    .next_u64());
        for (const auto& meth : method_order) {
            std::vector<double> hypers = {0.0};
            if (meth == "irmv1" || meth == "vrex") hypers = opts.irm_lambdas;
            for (double h : hypers)
                for (int rep = 0; rep < opts.reps; ++rep) {
                    LinearJob j;
                    j.kind = cases[c].first;
                    j.scenario = cases[c].second;
                    j.method = meth;
                    j.hyper = h;
                    j.rep = rep;
                    // Methods share data within a replication.
                    j.data_seed = rep_seeds[static_cast<std::size_t>(rep)];
                    jobs.push_back(std::move(j));
                }
        }
    }

    std::vector<std::function<void()>> tasks;
    tasks.reserve(jobs.size());
    for (auto& job : jobs)
        tasks.emplace_back([&job, &opts] {
            try {
                job.mae = linear_cell_mae(job, opts);
            } catch (const std::exception& e) {
                job.error = e.what();
            }
        });
    run_pool(tasks, opts.threads);

    std::vector<std::string> scenario_order;
    for (const auto& [kind, name] : cases) scenario_order.push_back(name);
    return aggregate_linear(jobs, scenario_order, method_order, opts);
}

// ---- gmm suite ----

struct GmmSplit {
    MultiEnvData train, validation, test;
};

GmmSplit gmm_data(const BenchOptions& opts, std::uint64_t data_seed) {
    SemScenario sc;
    sc.kind = ScenarioKind::Gmm;
    sc.env_params = {0.01, 0.02, 0.03, 0.04, 0.05};
    for (int e = 0; e < 11; ++e) sc.env_params.push_back(0.0); // 1 val, 10 test
    sc.n_per_env = opts.gmm_n;
    sc.seed = data_seed;
    Generated gen = generate(sc);
    GmmSplit split;
    split.train.known_nondescendants = gen.multi.known_nondescendants;
    split.validation.known_nondescendants = gen.multi.known_nondescendants;
    split.test.known_nondescendants = gen.multi.known_nondescendants;
    for (std::size_t e = 0; e < gen.multi.environments.size(); ++e) {
        auto& env = gen.multi.environments[e];
        if (e < 5) split.train.environments.push_back(std::move(env));
        else if (e == 5) split.validation.environments.push_back(std::move(env));
        else split.test.environments.push_back(std::move(env));
    }
    return split;
}

MultiEnvData first_columns(const MultiEnvData& multi, Eigen::Index k) {
    MultiEnvData out;
    for (const auto& env : multi.environments) {
        EnvironmentDataset r;
        r.env_id = env.env_id;
        r.X = env.X.leftCols(k);
        r.y = env.y;
        r.covariate_names.assign(env.covariate_names.begin(),
                                 env.covariate_names.begin() + k);
        out.environments.push_back(std::move(r));
    }
    for (auto j : multi.known_nondescendants)
        if (j < k) out.known_nondescendants.push_back(j);
    return out;
}

double mean_accuracy(const ModelParams& params, const MultiEnvData& multi,
                     Eigen::Index cols) {
    double total = 0;
    for (const auto& env : multi.environments) {
        if (cols == env.p()) {
            total += accuracy(params, env);
        } else {
            EnvironmentDataset r;
            r.env_id = env.env_id;
            r.X = env.X.leftCols(cols);
            r.y = env.y;
            r.covariate_names.assign(env.covariate_names.begin(),
                                     env.covariate_names.begin() + cols);
            total += accuracy(params, r);
        }
    }
    return 100.0 * total / static_cast<double>(multi.environments.size());
}

struct GmmJob {
    std::string method;
    double hyper = 0.0;
    AccuracyCell cell;
};

void gmm_cell(GmmJob& job, const GmmSplit& data, const BenchOptions& opts,
              std::uint64_t fit_seed) {
    const Eigen::Index full_p = data.train.p();
    const Eigen::Index x_only = 5;
    bool oracle = job.method == "oracle";
    Eigen::Index input = oracle ? x_only : full_p;
    ModelShape shape =
        ModelShape::mlp(input, {opts.gmm_width, opts.gmm_width}, 5);
    RiskSpec risk{Loss::CrossEntropy};

    OptimConfig oc;
    oc.outer_grad = OuterGrad::GradientDifference;
    oc.init_jitter_sd = opts.gmm_init_sd;
    oc.seed = fit_seed;
    oc.tol = 1e-10;

    ObjectiveSpec obj;
    if (job.method == "erm" || oracle) {
        obj.method = Method::Erm;
        oc.step_size = opts.gmm_erm_eta;
        oc.max_iters = oracle ? opts.gmm_oracle_iters : opts.gmm_erm_iters;
    } else if (job.method == "coco") {
        obj.method = Method::CocoErm;
        obj.lambda_r = job.hyper;
        oc.step_size = opts.gmm_coco_eta;
        oc.max_iters = opts.gmm_coco_iters;
        oc.anneal.enabled = true;
    } else if (job.method == "irmv1") {
        obj.method = Method::Irmv1;
        obj.lambda = job.hyper;
        oc.step_size = opts.gmm_coco_eta;
        oc.max_iters = opts.gmm_coco_iters;
    } else if (job.method == "vrex") {
        obj.method = Method::Vrex;
        obj.lambda_vrex = job.hyper;
        oc.step_size = opts.gmm_coco_eta;
        oc.max_iters = opts.gmm_coco_iters;
    } else {
        throw std::invalid_argument("unknown gmm method: " + job.method);
    }

    MultiEnvData train_view = oracle ? first_columns(data.train, x_only)
                                     : MultiEnvData{};
    const MultiEnvData& train = oracle ? train_view : data.train;
    FitResult fr = fit(train, risk, obj, oc, shape);

    job.cell.method = job.method;
    job.cell.hyper = job.hyper;
    job.cell.train = mean_accuracy(fr.params, data.train, input);
    job.cell.validation = mean_accuracy(fr.params, data.validation, input);
    job.cell.test = mean_accuracy(fr.params, data.test, input);
}

BenchReport gmm_suite(const BenchOptions& opts) {
    Rng master(opts.seed);
    std::uint64_t data_seed = master.child(7).next_u64();
    std::uint64_t fit_seed = master.child(8).next_u64();
    GmmSplit data = gmm_data(opts, data_seed);

    std::vector<double> lambdas;
    if (opts.gmm_sweep) {
        int k = std::max(opts.gmm_lambda_count, 1);
        double llo = std::log(opts.gmm_lambda_lo);
        double lhi = std::log(opts.gmm_lambda_hi);
        for (int i = 0; i < k; ++i) {
            double t = k == 1 ? 0.0 : static_cast<double>(i) / (k - 1);
            lambdas.push_back(std::exp(llo + t * (lhi - llo)));
        }
    } else {
        lambdas = {opts.gmm_coco_lambda};
    }

    std::vector<GmmJob> jobs;
    for (const char* m : {"erm", "irmv1", "vrex", "coco", "oracle"}) {
        if (!wanted(opts, m)) continue;
        std::string meth = m;
        if (meth == "erm" || meth == "oracle") {
            jobs.push_back({meth, 0.0, {}});
        } else {
            for (double l : lambdas) jobs.push_back({meth, l, {}});
        }
    }

    std::vector<std::function<void()>> tasks;
    tasks.reserve(jobs.size());
    for (auto& job : jobs)
        tasks.emplace_back([&job, &data, &opts, fit_seed] {
            try {
                gmm_cell(job, data, opts, fit_seed);
            } catch (const std::exception& e) {
                job.cell.method = job.method;
                job.cell.hyper = job.hyper;
                job.cell.error = e.what();
            }
        });
    run_pool(tasks, opts.threads);

    BenchReport report;
    report.suite = "gmm";
    for (const char* m : {"erm", "irmv1", "vrex", "coco", "oracle"}) {
        std::string meth = m;
        if (!wanted(opts, meth)) continue;
        const GmmJob* best = nullptr;
        const GmmJob* errored = nullptr;
        for (const auto& j : jobs) {
            if (j.method != meth) continue;
            if (!j.cell.error.empty()) {
                errored = &j;
                continue;
            }
            // Penalty weights are chosen on the validation environment.
            if (best == nullptr || j.cell.validation > best->cell.validation)
                best = &j;
        }
        if (best != nullptr) report.accuracy.push_back(best->cell);
        else if (errored != nullptr) report.accuracy.push_back(errored->cell);
    }

    nlohmann::json meta{
        {"seed", opts.seed},
        {"n_per_env", opts.gmm_n},
        {"train_corruption", {0.01, 0.02, 0.03, 0.04, 0.05}},
        {"validation_envs", 1},
        {"test_envs", 10},
        {"mlp_hidden", {opts.gmm_width, opts.gmm_width}},
        {"erm", {{"eta", opts.gmm_erm_eta}, {"max_iters", opts.gmm_erm_iters}}},
        {"oracle", {{"eta", opts.gmm_erm_eta}, {"max_iters", opts.gmm_oracle_iters}}},
        {"penalized", {{"eta", opts.gmm_coco_eta}, {"max_iters", opts.gmm_coco_iters}}},
        {"init_sd", opts.gmm_init_sd},
        {"lambdas", lambdas},
    };
    report.meta_text = meta.dump();
    return report;
}

// ---- appendix-b1 suite ----

BenchReport b1_suite(const BenchOptions& opts) {
    std::vector<double> sigmas = {0.2, 0.5, 1.0};
    SemScenario sc;
    sc.kind = ScenarioKind::AppendixB1;
    sc.env_params = sigmas;
    sc.n_per_env = opts.n;
    sc.seed = Rng(opts.seed).child(11).next_u64();
    Generated gen = generate(sc);

    BenchReport report;
    report.suite = "appendix-b1";
    double sum_v = 0;
    for (double s : sigmas) sum_v += s * s;
    for (std::size_t e = 0; e < gen.multi.environments.size(); ++e) {
        double v = sigmas[e] * sigmas[e];
        ModelParams ols = fit_ols_closed_form(gen.multi.environments[e]);
        CoeffRow row;
        row.label = "ols env" + std::to_string(e) +
                    " sigma=" + std::to_string(sigmas[e]).substr(0, 3);
        row.estimate = to_std(ols.theta);
        row.reference = {1 / (1 + v), 1 / (1 + v), v / (1 + v), v / (1 + v)};
        Eigen::VectorXd ref = Eigen::Map<Eigen::VectorXd>(row.reference.data(), 4);
        row.max_abs_dev = (ols.theta - ref).cwiseAbs().maxCoeff();
        report.coeffs.push_back(std::move(row));
    }

    ModelParams pooled = fit_ols_closed_form(gen.multi);
    {
        double K = static_cast<double>(sigmas.size());
        CoeffRow row;
        row.label = "pooled ols";
        row.estimate = to_std(pooled.theta);
        double c = K / (K + sum_v);
        row.reference = {c, c, 1 - c, 1 - c};
        Eigen::VectorXd ref = Eigen::Map<Eigen::VectorXd>(row.reference.data(), 4);
        row.max_abs_dev = (pooled.theta - ref).cwiseAbs().maxCoeff();
        report.coeffs.push_back(std::move(row));
    }

    {
        ObjectiveSpec obj;
        obj.method = Method::CocoModified;
        OptimConfig oc;
        oc.step_size = opts.linear_eta;
        oc.max_iters = opts.linear_iters;
        oc.tol = opts.linear_tol;
        oc.outer_grad = OuterGrad::Analytic;
        oc.init = InitKind::GivenVector;
        oc.init_vector = pooled.theta;
        FitResult fr = fit(gen.multi, RiskSpec{Loss::Squared}, obj, oc,
                           ModelShape::linear(gen.multi.p()));
        CoeffRow row;
        row.label = "coco";
        row.estimate = to_std(fr.params.theta);
        row.reference = {1, 1, 0, 0};
        Eigen::VectorXd ref = Eigen::Map<Eigen::VectorXd>(row.reference.data(), 4);
        row.max_abs_dev = (fr.params.theta - ref).cwiseAbs().maxCoeff();
        report.coeffs.push_back(std::move(row));
    }

    nlohmann::json meta{
        {"seed", opts.seed},
        {"n_per_env", opts.n},
        {"sigmas", sigmas},
    };
    report.meta_text = meta.dump();
    return report;
}

} // namespace

BenchReport run_linear_cases(const BenchOptions& opts) { return linear_suite(opts); }
BenchReport run_gmm(const BenchOptions& opts) { return gmm_suite(opts); }
BenchReport run_appendix_b1(const BenchOptions& opts) { return b1_suite(opts); }

BenchReport run_bench(const BenchOptions& opts) {
    if (opts.suite == "linear-cases") return linear_suite(opts);
    if (opts.suite == "gmm") return gmm_suite(opts);
    if (opts.suite == "appendix-b1") return b1_suite(opts);
    throw std::invalid_argument("unknown bench suite: " + opts.suite);
}

nlohmann::json BenchReport::to_json() const {
    nlohmann::json j;
    j["suite"] = suite;
    j["metadata"] = meta_text.empty() ? nlohmann::json::object()
                                      : nlohmann::json::parse(meta_text);
    if (!mae.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& c : mae) {
            nlohmann::json row{{"scenario", c.scenario}, {"method", c.method},
                               {"hyper", c.hyper},       {"reps", c.reps},
                               {"mean_mae", c.mean},     {"sd_mae", c.sd},
                               {"per_rep", c.per_rep}};
            if (!c.error.empty()) row["error"] = c.error;
            rows.push_back(std::move(row));
        }
        j["mae"] = std::move(rows);
    }
    if (!accuracy.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& c : accuracy) {
            nlohmann::json row{{"method", c.method},
                               {"hyper", c.hyper},
                               {"train_accuracy", c.train},
                               {"validation_accuracy", c.validation},
                               {"test_accuracy", c.test}};
            if (!c.error.empty()) row["error"] = c.error;
            rows.push_back(std::move(row));
        }
        j["accuracy"] = std::move(rows);
    }
    if (!coeffs.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& c : coeffs) {
            rows.push_back(nlohmann::json{{"label", c.label},
                                          {"estimate", c.estimate},
                                          {"reference", c.reference},
                                          {"max_abs_dev", c.max_abs_dev}});
        }
        j["coefficients"] = std::move(rows);
    }
    return j;
}

std::string BenchReport::to_csv() const {
    std::ostringstream out;
    auto num = [](double v) {
        std::ostringstream s;
        s.precision(10);
        s << v;
        return s.str();
    };
    if (!mae.empty()) {
        out << "scenario,method,hyper,reps,mean_mae,sd_mae,error\r\n";
        for (const auto& c : mae)
            out << csv_quote(c.scenario) << ',' << csv_quote(c.method) << ','
                << num(c.hyper) << ',' << c.reps << ',' << num(c.mean) << ','
                << num(c.sd) << ',' << csv_quote(c.error) << "\r\n";
    } else if (!accuracy.empty()) {
        out << "method,hyper,train_accuracy,validation_accuracy,test_accuracy,error\r\n";
        for (const auto& c : accuracy)
            out << csv_quote(c.method) << ',' << num(c.hyper) << ','
                << num(c.train) << ',' << num(c.validation) << ','
                << num(c.test) << ',' << csv_quote(c.error) << "\r\n";
    } else {
        out << "label";
        std::size_t width = coeffs.empty() ? 0 : coeffs[0].estimate.size();
        for (std::size_t i = 1; i <= width; ++i) out << ",estimate" << i;
        for (std::size_t i = 1; i <= width; ++i) out << ",reference" << i;
        out << ",max_abs_dev\r\n";
        for (const auto& c : coeffs) {
            out << csv_quote(c.label);
            for (double v : c.estimate) out << ',' << num(v);
            for (double v : c.reference) out << ',' << num(v);
            out << ',' << num(c.max_abs_dev) << "\r\n";
        }
    }
    return out.str();
}

} // namespace coco
