// Config-driven front end: generate datasets, fit estimators, run
// identification checks, run benchmark suites, and pretty-print reports.
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include "coco/bench.hpp"
#include "coco/config.hpp"
#include "coco/csv.hpp"
#include "coco/identify.hpp"
#include "coco/objectives.hpp"
#include "coco/optimizer.hpp"
#include "coco/predictors.hpp"
#include "coco/rng.hpp"
#include "coco/scenarios.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using coco::Config;
using nlohmann::json;

namespace {

std::uint64_t master_seed(const Config& cfg) { return cfg.get_u64("seed", 0); }

coco::SemScenario scenario_from(const Config& cfg, const char* who) {
    std::string kind_s = cfg.get_string("scenario.kind", "");
    if (kind_s.empty())
        throw std::invalid_argument(std::string(who) +
                                    ": scenario.kind is required (--case)");
    coco::SemScenario sc;
    sc.kind = coco::scenario_kind_from_string(kind_s);
    sc.n_per_env = cfg.get_long("scenario.n", 10000);
    sc.seed = cfg.get_u64("scenario.seed", master_seed(cfg));
    sc.gmm_classes = static_cast<int>(cfg.get_long("scenario.gmm_classes", 5));
    sc.env_params = cfg.get_doubles("scenario.envs", {});
    if (sc.env_params.empty()) {
        long count = cfg.get_long("scenario.envs_count", 0);
        if (count > 0) {
            // Same intervention-family laws and seed stream the streaming
            // check uses, so gen/check agree on what "environment k" means.
            coco::Rng param_rng = coco::Rng(sc.seed).child(0xA001);
            for (long e = 0; e < count; ++e) {
                switch (sc.kind) {
                    case coco::ScenarioKind::NonIdentifiable:
                        sc.env_params.push_back(param_rng.uniform(1.0, 3.0));
                        break;
                    case coco::ScenarioKind::AppendixB1:
                        sc.env_params.push_back(param_rng.uniform(0.2, 1.0));
                        break;
                    case coco::ScenarioKind::Gmm:
                        throw std::invalid_argument(
                            "gmm environments need explicit corruption "
                            "probabilities (scenario.envs)");
                    default:
                        sc.env_params.push_back(param_rng.uniform(0.0, 5.0));
                }
            }
        } else {
            switch (sc.kind) {
                case coco::ScenarioKind::AppendixB1:
                    sc.env_params = {0.2, 0.5, 1.0};
                    break;
                case coco::ScenarioKind::NonIdentifiable:
                    sc.env_params = {1.0, 2.0, 3.0};
                    break;
                case coco::ScenarioKind::Gmm:
                    sc.env_params = {0.01, 0.02, 0.03, 0.04, 0.05};
                    break;
                default:
                    sc.env_params = {0.5, 2.0};
            }
        }
    }
    sc.validate();
    return sc;
}

// Covariate mask from the config: integer tokens are 0-based column
// indices, anything else is matched against covariate names.
std::vector<Eigen::Index> mask_from(const Config& cfg,
                                    const std::vector<std::string>& names) {
    std::vector<Eigen::Index> mask;
    for (const auto& tok : cfg.get_strings("nondescendants", {})) {
        try {
            std::size_t used = 0;
            long idx = std::stol(tok, &used);
            if (used == tok.size()) {
                mask.push_back(idx);
                continue;
            }
        } catch (...) {
        }
        auto it = std::find(names.begin(), names.end(), tok);
        if (it == names.end())
            throw std::invalid_argument("nondescendants: unknown covariate '" +
                                        tok + "'");
        mask.push_back(it - names.begin());
    }
    return mask;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

fs::path out_dir(const Config& cfg) {
    fs::path dir = cfg.get_string("out", ".");
    fs::create_directories(dir);
    return dir;
}

struct LoadedData {
    coco::MultiEnvData multi;
    Eigen::VectorXd beta; // empty when unknown
    bool generated = false;
};

// data.files wins over a generative scenario; a scenario supplies the true
// coefficients for MAE reporting, files may point at data.metadata.
LoadedData load_data(const Config& cfg, const char* who) {
    LoadedData out;
    auto files = cfg.get_strings("data.files", {});
    if (!files.empty()) {
        out.multi = coco::load_csv(files);
        std::string meta_path = cfg.get_string("data.metadata", "");
        if (!meta_path.empty()) {
            std::ifstream in(meta_path);
            if (!in)
                throw std::invalid_argument("cannot open metadata: " + meta_path);
            json meta = json::parse(in);
            if (meta.contains("beta")) {
                auto b = meta["beta"].get<std::vector<double>>();
                out.beta = Eigen::Map<Eigen::VectorXd>(b.data(), b.size());
            }
            if (meta.contains("nondescendants"))
                out.multi.known_nondescendants =
                    meta["nondescendants"].get<std::vector<Eigen::Index>>();
        }
    } else {
        coco::SemScenario sc = scenario_from(cfg, who);
        coco::Generated gen = coco::generate(sc);
        out.multi = std::move(gen.multi);
        out.beta = gen.truth.beta;
        out.generated = true;
    }
    if (!out.multi.environments.empty()) {
        auto mask = mask_from(cfg, out.multi.environments.front().covariate_names);
        if (!mask.empty()) out.multi.known_nondescendants = std::move(mask);
    }
    return out;
}

coco::Activation activation_from(const std::string& s) {
    if (s == "tanh") return coco::Activation::Tanh;
    if (s == "relu") return coco::Activation::Relu;
    if (s == "identity") return coco::Activation::Identity;
    throw std::invalid_argument("unknown activation: " + s);
}

struct TaskSpec {
    coco::ModelShape shape;
    coco::RiskSpec risk;
};

TaskSpec task_from(const Config& cfg, const coco::MultiEnvData& multi,
                   bool gmm_scenario) {
    TaskSpec t;
    Eigen::Index p = multi.p();
    std::string kind = cfg.get_string("model.kind", gmm_scenario ? "mlp" : "linear");
    if (kind == "linear") {
        t.shape = coco::ModelShape::linear(p);
    } else if (kind == "logistic") {
        t.shape = coco::ModelShape::logistic(p);
    } else if (kind == "mlp") {
        std::vector<Eigen::Index> hidden;
        for (double h : cfg.get_doubles("model.hidden", {10, 10}))
            hidden.push_back(static_cast<Eigen::Index>(h));
        long classes = cfg.get_long("model.classes",
                                    gmm_scenario ? cfg.get_long("scenario.gmm_classes", 5) : 2);
        t.shape = coco::ModelShape::mlp(p, hidden, classes,
                                        activation_from(cfg.get_string(
                                            "model.activation", "tanh")));
    } else {
        throw std::invalid_argument("unknown model.kind: " + kind);
    }
    std::string loss =
        cfg.get_string("loss", kind == "linear" ? "squared" : "cross-entropy");
    if (loss == "squared") t.risk.loss = coco::Loss::Squared;
    else if (loss == "cross-entropy" || loss == "ce")
        t.risk.loss = coco::Loss::CrossEntropy;
    else throw std::invalid_argument("unknown loss: " + loss);
    t.shape.validate();
    return t;
}

coco::ObjectiveSpec objective_from(const Config& cfg) {
    coco::ObjectiveSpec obj;
    obj.method = coco::method_from_string(cfg.get_string("method", "coco-modified"));
    obj.lambda = cfg.get_double("objective.lambda", 0.0);
    obj.lambda_r = cfg.get_double("objective.lambda_r", 0.0);
    obj.lambda_w = cfg.get_double("objective.lambda_w", 0.0);
    obj.lambda_vrex = cfg.get_double("objective.lambda_vrex", 0.0);
    std::string est = cfg.get_string("objective.estimator", "population");
    if (est == "population") obj.estimator = coco::Estimator::PopulationStyle;
    else if (est == "unbiased") obj.estimator = coco::Estimator::UnbiasedApprox1;
    else if (est == "biased") obj.estimator = coco::Estimator::BiasedApprox2;
    else throw std::invalid_argument("unknown objective.estimator: " + est);
    obj.validate();
    return obj;
}

coco::OptimConfig optim_from(const Config& cfg, const TaskSpec& task,
                             const coco::MultiEnvData& multi) {
    coco::OptimConfig oc;
    bool linear_sq = task.shape.kind == coco::ModelKind::Linear &&
                     task.risk.loss == coco::Loss::Squared;
    oc.step_size = cfg.get_double("optim.eta", 0.1);
    oc.max_iters = cfg.get_long("optim.iters", linear_sq ? 50000 : 10000);
    oc.tol = cfg.get_double("optim.tol", linear_sq ? 1e-9 : 1e-8);
    oc.fd_step = cfg.get_double("optim.fd_step", 1e-4);
    oc.seed = cfg.get_u64("optim.seed", master_seed(cfg));
    oc.init_jitter_sd = cfg.get_double("optim.jitter_sd", linear_sq ? 0.01 : 0.1);

    std::string og = cfg.get_string("optim.outer_grad",
                                    linear_sq ? "analytic" : "gradient-difference");
    if (og == "analytic") oc.outer_grad = coco::OuterGrad::Analytic;
    else if (og == "fd" || og == "finite-difference")
        oc.outer_grad = coco::OuterGrad::FiniteDifference;
    else if (og == "gradient-difference" || og == "gd")
        oc.outer_grad = coco::OuterGrad::GradientDifference;
    else throw std::invalid_argument("unknown optim.outer_grad: " + og);

    std::string init = cfg.get_string("optim.init", linear_sq ? "ols" : "jitter");
    if (init == "zero") {
        oc.init = coco::InitKind::ZeroPlusJitter;
        oc.init_jitter_sd = 0.0;
    } else if (init == "jitter") {
        oc.init = coco::InitKind::ZeroPlusJitter;
    } else if (init == "ols") {
        if (!linear_sq)
            throw std::invalid_argument("optim.init=ols needs a linear model "
                                        "with squared loss");
        oc.init = coco::InitKind::GivenVector;
        oc.init_vector = coco::fit_ols_closed_form(multi).theta;
    } else if (init == "vector") {
        oc.init = coco::InitKind::GivenVector;
        auto v = cfg.get_doubles("optim.init_vector", {});
        oc.init_vector = Eigen::Map<Eigen::VectorXd>(v.data(), v.size());
    } else {
        throw std::invalid_argument("unknown optim.init: " + init);
    }

    oc.anneal.enabled = cfg.get_bool("optim.anneal", false);
    oc.anneal.trigger_fraction = cfg.get_double("optim.anneal.trigger", 0.5);
    oc.anneal.escape_norm = cfg.get_double("optim.anneal.escape", 0.0);
    oc.anneal.decay_factor = cfg.get_double("optim.anneal.decay", 0.9);
    oc.validate();
    return oc;
}

int cmd_gen(const Config& cfg) {
    coco::SemScenario sc = scenario_from(cfg, "gen");
    coco::Generated gen = coco::generate(sc);
    fs::path dir = out_dir(cfg);
    for (const auto& env : gen.multi.environments)
        coco::save_csv(env, (dir / (env.env_id + ".csv")).string());
    write_text(dir / "metadata.json", gen.meta().dump(2) + "\n");
    std::cout << "wrote " << gen.multi.environments.size() << " environments + "
              << "metadata.json to " << dir.string() << "\n";
    return 0;
}

int cmd_fit(const Config& cfg) {
    LoadedData data = load_data(cfg, "fit");
    bool gmm = data.generated &&
               cfg.get_string("scenario.kind", "") == "gmm";
    TaskSpec task = task_from(cfg, data.multi, gmm);
    coco::ObjectiveSpec obj = objective_from(cfg);
    coco::OptimConfig oc = optim_from(cfg, task, data.multi);

    coco::FitResult res = coco::fit(data.multi, task.risk, obj, oc, task.shape);

    json report;
    report["method"] = coco::to_string(obj.method);
    report["params"] = std::vector<double>(res.params.theta.data(),
                                           res.params.theta.data() +
                                               res.params.theta.size());
    report["converged"] = res.converged;
    report["final_gradient_norm"] = res.final_gradient_norm;
    if (!res.diagnostic.empty()) report["diagnostic"] = res.diagnostic;
    if (data.beta.size() == res.params.theta.size()) {
        double mae = (res.params.theta - data.beta).cwiseAbs().mean();
        report["mae"] = mae;
        report["beta"] = std::vector<double>(data.beta.data(),
                                             data.beta.data() + data.beta.size());
    }
    // The trace is decimated to ~1000 points; the last entry is always kept.
    json trace = json::array();
    std::size_t stride = std::max<std::size_t>(1, res.objective_trace.size() / 1000);
    for (std::size_t i = 0; i < res.objective_trace.size(); ++i)
        if (i % stride == 0 || i + 1 == res.objective_trace.size())
            trace.push_back({res.objective_trace[i].first,
                             res.objective_trace[i].second});
    report["objective_trace"] = std::move(trace);

    fs::path dir = out_dir(cfg);
    write_text(dir / "fit.json", report.dump(2) + "\n");
    std::cout << "method " << coco::to_string(obj.method)
              << (res.converged ? ": converged" : ": not converged");
    if (report.contains("mae")) std::cout << ", mae " << report["mae"].get<double>();
    std::cout << " (" << (dir / "fit.json").string() << ")\n";

    // Numerical failures are distinguishable from ordinary non-convergence.
    bool numerical = !res.diagnostic.empty() &&
                     res.diagnostic.find("max iterations") == std::string::npos &&
                     res.diagnostic.find("best objective") == std::string::npos;
    return numerical ? 2 : 0;
}

int cmd_check(const Config& cfg) {
    auto files = cfg.get_strings("data.files", {});
    double tol = cfg.get_double("check.tol", 0.05);
    bool invariants = cfg.get_bool("check.invariants", true);
    coco::CheckReport report;
    std::vector<Eigen::Index> C;

    if (!files.empty()) {
        LoadedData data = load_data(cfg, "check");
        C = data.multi.known_nondescendants;
        if (C.empty())
            throw std::invalid_argument("check: nondescendants (C) must be "
                                        "non-empty");
        report = coco::run_checks(data.multi, C, tol, invariants);
    } else {
        coco::SemScenario sc = scenario_from(cfg, "check");
        C = mask_from(cfg, {});
        if (!cfg.has("nondescendants"))
            C = coco::default_nondescendants(sc.kind, sc.gmm_classes);
        if (C.empty())
            throw std::invalid_argument("check: nondescendants (C) must be "
                                        "non-empty");
        int max_envs = static_cast<int>(cfg.get_long("check.max_envs", 10));
        auto [multi, rep] = coco::ico_workflow(sc, C, max_envs);
        report = std::move(rep);
        if (invariants) {
            coco::CheckReport inv = coco::run_checks(multi, C, tol, true);
            report.invariant_sets = std::move(inv.invariant_sets);
            report.distinct_invariant_vectors = inv.distinct_invariant_vectors;
        }
    }

    json j = report.to_json();
    j["nondescendants"] = C;
    j["tolerance"] = tol;
    fs::path dir = out_dir(cfg);
    write_text(dir / "check.json", j.dump(2) + "\n");
    std::cout << (report.rank_check.passes ? "identifiable" : "not identified")
              << ": rank " << report.rank_check.rank << " of "
              << report.rank_check.matrix_rows << " stacked rows after "
              << report.environments_used << " environments ("
              << (dir / "check.json").string() << ")\n";
    return 0;
}

int cmd_bench(const Config& cfg) {
    coco::BenchOptions opts;
    opts.suite = cfg.get_string("bench.suite", "linear-cases");
    opts.seed = master_seed(cfg);
    opts.threads = static_cast<int>(cfg.get_long("bench.threads", 0));
    opts.methods = cfg.get_strings("bench.methods", {});
    opts.n = cfg.get_long("bench.n", cfg.get_long("scenario.n", 10000));
    opts.reps = static_cast<int>(cfg.get_long("bench.reps", 10));
    opts.gammas = cfg.get_doubles("bench.gammas", opts.gammas);
    opts.irm_lambdas = cfg.get_doubles("bench.irm_lambdas", opts.irm_lambdas);
    opts.linear_iters = cfg.get_long("bench.linear_iters", opts.linear_iters);
    opts.linear_eta = cfg.get_double("bench.linear_eta", opts.linear_eta);
    opts.linear_tol = cfg.get_double("bench.linear_tol", opts.linear_tol);
    opts.gmm_n = cfg.get_long("bench.gmm_n", opts.gmm_n);
    opts.gmm_width = cfg.get_long("bench.gmm_width", opts.gmm_width);
    opts.gmm_erm_iters = cfg.get_long("bench.gmm_erm_iters", opts.gmm_erm_iters);
    opts.gmm_oracle_iters =
        cfg.get_long("bench.gmm_oracle_iters", opts.gmm_oracle_iters);
    opts.gmm_coco_iters = cfg.get_long("bench.gmm_coco_iters", opts.gmm_coco_iters);
    opts.gmm_erm_eta = cfg.get_double("bench.gmm_erm_eta", opts.gmm_erm_eta);
    opts.gmm_coco_eta = cfg.get_double("bench.gmm_coco_eta", opts.gmm_coco_eta);
    opts.gmm_init_sd = cfg.get_double("bench.gmm_init_sd", opts.gmm_init_sd);
    opts.gmm_lambda_count = static_cast<int>(
        cfg.get_long("bench.gmm_lambda_count", opts.gmm_lambda_count));
    opts.gmm_lambda_lo = cfg.get_double("bench.gmm_lambda_lo", opts.gmm_lambda_lo);
    opts.gmm_lambda_hi = cfg.get_double("bench.gmm_lambda_hi", opts.gmm_lambda_hi);
    opts.gmm_sweep = cfg.get_bool("bench.gmm_sweep", opts.gmm_sweep);
    opts.gmm_coco_lambda =
        cfg.get_double("bench.gmm_coco_lambda", opts.gmm_coco_lambda);
    if (opts.reps < 1) throw std::invalid_argument("bench.reps must be >= 1");

    coco::BenchReport report = coco::run_bench(opts);

    fs::path dir = out_dir(cfg);
    std::string stem = "bench_" + opts.suite;
    write_text(dir / (stem + ".json"), report.to_json().dump(2) + "\n");
    write_text(dir / (stem + ".csv"), report.to_csv());
    std::cout << "suite " << opts.suite << ": wrote " << stem << ".json and "
              << stem << ".csv to " << dir.string() << "\n";
    return 0;
}

// ---- report rendering ----

std::string fixed(double v, int prec) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

void print_table(std::ostream& out,
                 const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& row : rows) {
        if (width.size() < row.size()) width.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c)
            width[c] = std::max(width[c], row[c].size());
    }
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
            if (c + 1 < row.size()) out << "  ";
        }
        out << "\n";
    }
}

int cmd_report(const std::string& input, const Config& cfg) {
    std::ifstream in(input);
    if (!in) throw std::invalid_argument("cannot open report input: " + input);
    json j = json::parse(in);
    std::ostringstream text;
    text << "suite: " << j.value("suite", "?") << "\n\n";

    if (j.contains("mae")) {
        // Pivot: one row per scenario, one column per method, mean (sd).
        std::vector<std::string> scenarios, methods;
        for (const auto& cell : j["mae"]) {
            std::string s = cell["scenario"], m = cell["method"];
            if (std::find(scenarios.begin(), scenarios.end(), s) == scenarios.end())
                scenarios.push_back(s);
            if (std::find(methods.begin(), methods.end(), m) == methods.end())
                methods.push_back(m);
        }
        std::vector<std::vector<std::string>> rows;
        std::vector<std::string> head{"scenario"};
        head.insert(head.end(), methods.begin(), methods.end());
        rows.push_back(head);
        for (const auto& s : scenarios) {
            std::vector<std::string> row{s};
            for (const auto& m : methods) {
                std::string val = "-";
                for (const auto& cell : j["mae"]) {
                    if (cell["scenario"] != s || cell["method"] != m) continue;
                    if (cell.contains("error")) val = "error";
                    else
                        val = fixed(cell["mean_mae"].get<double>(), 3) + " (" +
                              fixed(cell["sd_mae"].get<double>(), 3) + ")";
                }
                row.push_back(val);
            }
            rows.push_back(row);
        }
        print_table(text, rows);
        text << "\nselected hyperparameters:\n";
        for (const auto& cell : j["mae"])
            if (cell["hyper"].get<double>() != 0.0)
                text << "  " << cell["scenario"].get<std::string>() << " "
                     << cell["method"].get<std::string>() << ": "
                     << cell["hyper"].get<double>() << "\n";
    }

    if (j.contains("accuracy")) {
        std::vector<std::vector<std::string>> rows;
        rows.push_back({"method", "hyper", "train", "validation", "test"});
        for (const auto& cell : j["accuracy"]) {
            if (cell.contains("error")) {
                rows.push_back({cell["method"], "-", "error", "error", "error"});
                continue;
            }
            rows.push_back({cell["method"],
                            cell["hyper"].get<double>() == 0.0
                                ? "-"
                                : fixed(cell["hyper"].get<double>(), 2),
                            fixed(cell["train_accuracy"].get<double>(), 1),
                            fixed(cell["validation_accuracy"].get<double>(), 1),
                            fixed(cell["test_accuracy"].get<double>(), 1)});
        }
        print_table(text, rows);
    }

    if (j.contains("coefficients")) {
        std::vector<std::vector<std::string>> rows;
        rows.push_back({"label", "estimate", "reference", "max_abs_dev"});
        auto join = [](const json& arr) {
            std::string s = "(";
            for (std::size_t i = 0; i < arr.size(); ++i) {
                if (i) s += ", ";
                s += fixed(arr[i].get<double>(), 3);
            }
            return s + ")";
        };
        for (const auto& cell : j["coefficients"])
            rows.push_back({cell["label"], join(cell["estimate"]),
                            join(cell["reference"]),
                            fixed(cell["max_abs_dev"].get<double>(), 4)});
        print_table(text, rows);
    }

    std::cout << text.str();
    if (cfg.has("out")) write_text(out_dir(cfg) / "report.txt", text.str());
    return 0;
}

struct CommonArgs {
    std::string config_path, out, method, kase;
    std::uint64_t seed = 0;
    long envs = 0, n = 0, reps = 0;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, CommonArgs& a, bool with_method = true) {
    sub->add_option("--config", a.config_path, "flat key=value config file");
    sub->add_option("--seed", a.seed, "master seed");
    sub->add_option("--out", a.out, "output directory");
    if (with_method) sub->add_option("--method", a.method, "objective method");
    sub->add_option("--case", a.kase, "scenario kind (case1..case5, "
                                      "appendix-b1, nonidentifiable, gmm)");
    sub->add_option("--envs", a.envs, "environment count (check: max draws)");
    sub->add_option("--n", a.n, "samples per environment");
    sub->add_option("--reps", a.reps, "benchmark replications");
    sub->add_option("overrides", a.overrides, "key=value config overrides");
}

Config build_config(const CLI::App* sub, const CommonArgs& a, bool check_cmd) {
    Config cfg = a.config_path.empty() ? Config::from_string("")
                                       : Config::from_file(a.config_path);
    if (sub->count("--seed")) cfg.set("seed", std::to_string(a.seed));
    if (sub->count("--out")) cfg.set("out", a.out);
    if (sub->get_option_no_throw("--method") && sub->count("--method"))
        cfg.set("method", a.method);
    if (sub->count("--case")) cfg.set("scenario.kind", a.kase);
    if (sub->count("--envs"))
        cfg.set(check_cmd ? "check.max_envs" : "scenario.envs_count",
                std::to_string(a.envs));
    if (sub->count("--n")) {
        cfg.set("scenario.n", std::to_string(a.n));
        cfg.set("bench.n", std::to_string(a.n));
    }
    if (sub->count("--reps")) cfg.set("bench.reps", std::to_string(a.reps));
    for (const auto& kv : a.overrides) cfg.apply_override(kv);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-environment causal estimation via gradient penalties"};
    app.require_subcommand(1);

    CommonArgs gen_args, fit_args, check_args, bench_args, report_args;
    std::string report_input;

    CLI::App* gen = app.add_subcommand("gen", "generate scenario CSVs + metadata");
    add_common(gen, gen_args, false);
    CLI::App* fit = app.add_subcommand("fit", "fit an estimator, write fit.json");
    add_common(fit, fit_args);
    CLI::App* check = app.add_subcommand("check", "identification checks");
    add_common(check, check_args, false);
    CLI::App* bench = app.add_subcommand("bench", "benchmark suites");
    add_common(bench, bench_args);
    CLI::App* report = app.add_subcommand("report", "render a bench JSON as text");
    report->add_option("input", report_input, "bench JSON file")->required();
    report->add_option("--out", report_args.out, "also write report.txt here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen(build_config(gen, gen_args, false));
        if (fit->parsed()) return cmd_fit(build_config(fit, fit_args, false));
        if (check->parsed()) return cmd_check(build_config(check, check_args, true));
        if (bench->parsed()) return cmd_bench(build_config(bench, bench_args, false));
        if (report->parsed()) {
            Config cfg = Config::from_string("");
            if (report->count("--out")) cfg.set("out", report_args.out);
            return cmd_report(report_input, cfg);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
