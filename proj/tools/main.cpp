// Command-line surface: fit, simulate, benchmark, path, replay. Payload
// outputs are byte-identical across reruns; wall-clock state lives only in
// the manifest sidecars written next to every output.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "l2e/baselines.hpp"
#include "l2e/dataset.hpp"
#include "l2e/errors.hpp"
#include "l2e/manifest.hpp"
#include "l2e/prox.hpp"
#include "l2e/rng.hpp"
#include "l2e/simulate.hpp"
#include "l2e/solver.hpp"
#include "l2e/version.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Kind = l2e::ConstraintSpec::Kind;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json vec_json(const l2e::Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

// Output directory precedence: --out-dir flag, then $L2E_OUT_DIR, then ".".
std::string resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("L2E_OUT_DIR"); env && *env) return env;
    return ".";
}

// Keeps every write inside the output directory: names must be relative and
// free of parent references. Subdirectories are created as needed.
std::string output_path(const std::string& out_dir, const std::string& name) {
    if (name.empty()) throw l2e::InvalidArgument("output name is empty");
    const fs::path rel(name);
    if (rel.is_absolute())
        throw l2e::InvalidArgument(
            "output name must be relative to the output directory: " + name);
    for (const auto& part : rel)
        if (part == "..")
            throw l2e::InvalidArgument("output name may not contain '..': " + name);
    const fs::path full = fs::path(out_dir) / rel;
    fs::create_directories(full.parent_path());
    return full.string();
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw l2e::DataError(l2e::DataError::Code::missing_file,
                             "cannot write " + path);
    out << body;
    if (!out)
        throw l2e::DataError(l2e::DataError::Code::missing_file,
                             "write failed for " + path);
}

l2e::RunManifest make_manifest(
    const std::string& command, std::uint64_t seed, json config,
    std::vector<std::pair<std::string, std::string>> digests) {
    l2e::RunManifest m;
    m.command = command;
    m.version = l2e::kVersion;
    m.seed = seed;
    m.config = std::move(config);
    m.input_digests = std::move(digests);
    m.timestamp = l2e::iso8601_utc_now();
    return m;
}

// Field count of the first CSV line, so "last column" can be the default
// response without a second full parse. Our CSVs are numeric and unquoted.
int csv_column_count(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw l2e::DataError(l2e::DataError::Code::missing_file,
                             "cannot open \"" + path + "\"");
    std::string line;
    if (!std::getline(in, line))
        throw l2e::DataError(l2e::DataError::Code::bad_format, path + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
}

// Integer-looking selectors are 0-based positions, anything else a column
// name; an empty selector means the last column.
l2e::ColumnRef response_ref(const std::string& flag, const std::string& input) {
    if (flag.empty()) return csv_column_count(input) - 1;
    try {
        std::size_t used = 0;
        const int idx = std::stoi(flag, &used);
        if (used == flag.size()) return idx;
    } catch (const std::exception&) {
    }
    return flag;
}

double parse_nonnegative(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size() && std::isfinite(v) && v >= 0.0) return v;
    } catch (const std::exception&) {
    }
    throw l2e::InvalidArgument(what + " needs a nonnegative number, got '" +
                               text + "'");
}

struct ConstraintChoice {
    std::string text;  // as given on the command line
    Kind kind = Kind::none;
    double value = 0.0;  // lambda or radius
};

ConstraintChoice parse_constraint_flag(const std::string& s) {
    ConstraintChoice c;
    c.text = s;
    if (s == "none") return c;
    if (s == "isotonic") {
        c.kind = Kind::isotonic;
        return c;
    }
    if (s == "convex") {
        c.kind = Kind::convex_shape;
        return c;
    }
    if (s.rfind("l1:", 0) == 0) {
        c.kind = Kind::l1_penalty;
        c.value = parse_nonnegative(s.substr(3), "l1 penalty");
        return c;
    }
    if (s.rfind("l1ball:", 0) == 0) {
        c.kind = Kind::l1_ball;
        c.value = parse_nonnegative(s.substr(7), "l1 ball radius");
        return c;
    }
    throw l2e::InvalidArgument(
        "unknown constraint '" + s +
        "' (expected none, l1:LAMBDA, l1ball:RADIUS, isotonic, convex)");
}

l2e::ConstraintSpec build_spec(const ConstraintChoice& c,
                               const l2e::Vector* sites) {
    switch (c.kind) {
        case Kind::none:
            return l2e::ConstraintSpec::none();
        case Kind::l1_penalty:
            return l2e::ConstraintSpec::l1_penalty(c.value);
        case Kind::l1_ball:
            return l2e::ConstraintSpec::l1_ball(c.value);
        case Kind::isotonic:
            return l2e::ConstraintSpec::isotonic();
        case Kind::convex_shape:
            return sites ? l2e::ConstraintSpec::convex_shape(*sites)
                         : l2e::ConstraintSpec::convex_shape();
    }
    throw l2e::InvalidArgument("unhandled constraint kind");
}

l2e::SimulationSpec::Generator parse_generator(const std::string& s) {
    using Gen = l2e::SimulationSpec::Generator;
    if (s == "cubic") return Gen::identity_design_cubic;
    if (s == "quartic") return Gen::identity_design_quartic;
    if (s == "linear") return Gen::linear_gaussian;
    throw l2e::InvalidArgument("unknown generator '" + s +
                               "' (expected cubic, quartic, linear)");
}

l2e::SimulationSpec::OutlierSide parse_side(const std::string& s) {
    using Side = l2e::SimulationSpec::OutlierSide;
    if (s == "response") return Side::response;
    if (s == "design") return Side::design;
    if (s == "both") return Side::both;
    throw l2e::InvalidArgument("unknown outlier side '" + s +
                               "' (expected response, design, both)");
}

// ---------------------------------------------------------------------------
// Solver knobs shared by fit (fully) and benchmark/path (tol + budget).

struct SolverFlags {
    double tol = 1e-8;
    int max_outer = 500;
    int n_beta = 5;
    int n_tau = 5;
    double tau_min = 1e-2;
    double tau_max = 1e2;
    double step_beta = 0.0;  // 0 = automatic 1/L
    double step_tau = 0.0;   // 0 = automatic 1/L
    double flag_threshold = 0.5;
    std::uint64_t seed = 0;
};

l2e::FitConfig to_config(const SolverFlags& f) {
    l2e::FitConfig cfg;
    cfg.tol = f.tol;
    cfg.max_outer_iter = f.max_outer;
    cfg.n_beta = f.n_beta;
    cfg.n_tau = f.n_tau;
    cfg.tau_min = f.tau_min;
    cfg.tau_max = f.tau_max;
    if (f.step_beta > 0.0) {
        cfg.step_beta_mode = l2e::StepMode::fixed;
        cfg.step_beta = f.step_beta;
    }
    if (f.step_tau > 0.0) {
        cfg.step_tau_mode = l2e::StepMode::fixed;
        cfg.step_tau = f.step_tau;
    }
    cfg.outlier_weight_threshold = f.flag_threshold;
    cfg.seed = f.seed;
    return cfg;
}

json solver_flags_json(const SolverFlags& f) {
    return json{{"tol", f.tol},
                {"max_outer", f.max_outer},
                {"n_beta", f.n_beta},
                {"n_tau", f.n_tau},
                {"tau_min", f.tau_min},
                {"tau_max", f.tau_max},
                {"step_beta", f.step_beta},
                {"step_tau", f.step_tau},
                {"flag_threshold", f.flag_threshold},
                {"seed", f.seed}};
}

SolverFlags solver_flags_from(const json& j) {
    SolverFlags f;
    f.tol = j.at("tol").get<double>();
    f.max_outer = j.at("max_outer").get<int>();
    f.n_beta = j.at("n_beta").get<int>();
    f.n_tau = j.at("n_tau").get<int>();
    f.tau_min = j.at("tau_min").get<double>();
    f.tau_max = j.at("tau_max").get<double>();
    f.step_beta = j.at("step_beta").get<double>();
    f.step_tau = j.at("step_tau").get<double>();
    f.flag_threshold = j.at("flag_threshold").get<double>();
    f.seed = j.at("seed").get<std::uint64_t>();
    return f;
}

void add_solver_flags(CLI::App* sub, SolverFlags& f) {
    sub->add_option("--tol", f.tol, "relative objective-change tolerance")
        ->capture_default_str();
    sub->add_option("--max-outer", f.max_outer, "outer iteration budget")
        ->capture_default_str();
    sub->add_option("--n-beta", f.n_beta, "proximal steps per beta block")
        ->capture_default_str();
    sub->add_option("--n-tau", f.n_tau, "projected steps per tau block")
        ->capture_default_str();
    sub->add_option("--tau-min", f.tau_min, "lower precision bound")
        ->capture_default_str();
    sub->add_option("--tau-max", f.tau_max, "upper precision bound")
        ->capture_default_str();
    sub->add_option("--step-beta", f.step_beta,
                    "fixed beta step in weighted-least-squares units "
                    "(0 = automatic 1/L)")
        ->capture_default_str();
    sub->add_option("--step-tau", f.step_tau, "fixed tau step (0 = automatic 1/L)")
        ->capture_default_str();
    sub->add_option("--flag-threshold", f.flag_threshold,
                    "flag observation i as an outlier iff w_i < threshold")
        ->capture_default_str();
    sub->add_option("--seed", f.seed, "seed recorded in the manifest")
        ->capture_default_str();
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
    std::string input;
    std::string response;  // "" = last column
    bool header = true;
    std::string constraint = "none";
    bool standardize = true;  // linear fits only; shape fits never standardize
    std::string output = "fit.json";
    std::string residuals;  // optional fitted/residual/weight CSV
    std::string out_dir;
    bool verbose = false;
    SolverFlags solver;
};

json fit_options_json(const FitOptions& o) {
    return json{{"input", o.input},
                {"response", o.response},
                {"header", o.header},
                {"constraint", o.constraint},
                {"standardize", o.standardize},
                {"output", o.output},
                {"residuals", o.residuals},
                {"out_dir", resolve_out_dir(o.out_dir)},
                {"verbose", o.verbose},
                {"solver", solver_flags_json(o.solver)}};
}

FitOptions fit_options_from(const json& j) {
    FitOptions o;
    o.input = j.at("input").get<std::string>();
    o.response = j.at("response").get<std::string>();
    o.header = j.at("header").get<bool>();
    o.constraint = j.at("constraint").get<std::string>();
    o.standardize = j.at("standardize").get<bool>();
    o.output = j.at("output").get<std::string>();
    o.residuals = j.at("residuals").get<std::string>();
    o.out_dir = j.at("out_dir").get<std::string>();
    o.verbose = j.at("verbose").get<bool>();
    o.solver = solver_flags_from(j.at("solver"));
    return o;
}

int run_fit(const FitOptions& opt) {
    const std::string out_dir = resolve_out_dir(opt.out_dir);
    const ConstraintChoice choice = parse_constraint_flag(opt.constraint);
    const std::string digest = l2e::fnv1a_file_digest(opt.input);
    const l2e::Dataset raw =
        l2e::load_csv(opt.input, response_ref(opt.response, opt.input), opt.header);

    const bool shape =
        choice.kind == Kind::isotonic || choice.kind == Kind::convex_shape;
    l2e::Dataset data;
    std::optional<l2e::Vector> sites;
    std::optional<l2e::StandardizeRecord> record;
    if (shape) {
        if (raw.p() != 1)
            throw l2e::ConstraintError(
                "shape constraints need a two-column (t, y) file; got " +
                std::to_string(raw.p()) + " predictor columns");
        l2e::Vector t = raw.X.col(0);
        for (Eigen::Index i = 1; i < t.size(); ++i)
            if (!(t[i] > t[i - 1]))
                throw l2e::DataError(
                    l2e::DataError::Code::bad_format,
                    "shape fits need strictly increasing sites; violated at file "
                    "row " + std::to_string(i + 1 + (opt.header ? 1 : 0)));
        sites = std::move(t);
        data.X = l2e::Matrix::Identity(raw.n(), raw.n());
        data.y = raw.y;
    } else if (opt.standardize) {
        data = l2e::standardize(raw);
        record = data.transform;
    } else {
        data = raw;
    }

    const l2e::ConstraintSpec spec =
        build_spec(choice, sites ? &*sites : nullptr);
    const l2e::FitConfig cfg = to_config(opt.solver);
    const l2e::FitResult res = l2e::fit(data, spec, cfg);

    if (opt.verbose)
        for (std::size_t k = 0; k < res.objective_trace.size(); ++k)
            std::fprintf(stderr, "outer %zu objective %.17g\n", k,
                         res.objective_trace[k]);

    // Report coefficients and fitted values on the original data scale.
    l2e::Vector coef = res.theta_hat.beta;
    json intercept;  // null unless the fit was standardized
    l2e::Vector fitted;
    if (shape) {
        fitted = res.theta_hat.beta;
    } else if (record) {
        double b0 = 0.0;
        coef = l2e::original_scale_coefficients(res.theta_hat.beta, *record, &b0);
        intercept = b0;
        fitted = (raw.X * coef).array() + b0;
    } else {
        fitted = raw.X * coef;
    }

    json flagged = json::array();
    for (std::size_t i = 0; i < res.outlier_flags.size(); ++i)
        if (res.outlier_flags[i]) flagged.push_back(i);

    json out;
    out["constraint"] = choice.text;
    out["converged"] = res.converged;
    out["outer_iterations"] = res.outer_iterations;
    out["objective"] = res.objective;
    out["tau"] = res.theta_hat.tau;
    out["coefficients"] = vec_json(coef);
    out["intercept"] = intercept;
    out["standardized"] = static_cast<bool>(record);
    out["weights"] = vec_json(res.weights);
    out["outlier_flags"] = res.outlier_flags;
    out["flagged_indices"] = flagged;
    out["objective_trace"] = res.objective_trace;
    out["init_fallback"] = res.init_fallback;
    out["step_halvings"] = res.step_halvings;
    out["sites"] = sites ? vec_json(*sites) : json();
    out["fitted_values"] = vec_json(fitted);
    out["pseudo_response"] = vec_json(res.pseudo_response);

    const std::string path = output_path(out_dir, opt.output);
    write_text(path, out.dump(2) + "\n");
    const l2e::RunManifest manifest =
        make_manifest("fit", cfg.seed, fit_options_json(opt), {{opt.input, digest}});
    l2e::write_manifest_sidecar(manifest, path);

    if (!opt.residuals.empty()) {
        std::string body = "fitted,residual,weight\n";
        for (Eigen::Index i = 0; i < raw.n(); ++i)
            body += fmt17(fitted[i]) + "," + fmt17(raw.y[i] - fitted[i]) + "," +
                    fmt17(res.weights[i]) + "\n";
        const std::string rpath = output_path(out_dir, opt.residuals);
        write_text(rpath, body);
        l2e::write_manifest_sidecar(manifest, rpath);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimOptions {
    std::string generator = "linear";  // cubic | quartic | linear
    int n = 100;
    int outliers = 0;
    double magnitude = 10.0;
    std::string side = "response";
    int p = 1;
    std::vector<double> beta_star;  // empty = all ones
    double tau_star = 1.0;
    std::uint64_t seed = 0;
    std::string output = "data.csv";
    std::string truth = "truth.json";
    std::string out_dir;
};

json sim_options_json(const SimOptions& o) {
    return json{{"generator", o.generator},
                {"n", o.n},
                {"outliers", o.outliers},
                {"magnitude", o.magnitude},
                {"side", o.side},
                {"p", o.p},
                {"beta_star", o.beta_star},
                {"tau_star", o.tau_star},
                {"seed", o.seed},
                {"output", o.output},
                {"truth", o.truth},
                {"out_dir", resolve_out_dir(o.out_dir)}};
}

SimOptions sim_options_from(const json& j) {
    SimOptions o;
    o.generator = j.at("generator").get<std::string>();
    o.n = j.at("n").get<int>();
    o.outliers = j.at("outliers").get<int>();
    o.magnitude = j.at("magnitude").get<double>();
    o.side = j.at("side").get<std::string>();
    o.p = j.at("p").get<int>();
    o.beta_star = j.at("beta_star").get<std::vector<double>>();
    o.tau_star = j.at("tau_star").get<double>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.output = j.at("output").get<std::string>();
    o.truth = j.at("truth").get<std::string>();
    o.out_dir = j.at("out_dir").get<std::string>();
    return o;
}

l2e::SimulationSpec sim_spec_from(const SimOptions& opt) {
    l2e::SimulationSpec spec;
    // Any inconsistency here comes from the flags, so it is a usage error.
    try {
        spec.generator = parse_generator(opt.generator);
        spec.outlier_side = parse_side(opt.side);
        spec.n = opt.n;
        spec.n_outliers = opt.outliers;
        spec.outlier_magnitude = opt.magnitude;
        spec.seed = opt.seed;
        spec.p = opt.p;
        spec.tau_star = opt.tau_star;
        if (!opt.beta_star.empty())
            spec.beta_star = Eigen::Map<const l2e::Vector>(
                opt.beta_star.data(),
                static_cast<Eigen::Index>(opt.beta_star.size()));
        spec.validate();
    } catch (const l2e::InvalidArgument&) {
        throw;
    } catch (const l2e::Error& e) {
        throw l2e::InvalidArgument(e.what());
    }
    return spec;
}

int run_simulate(const SimOptions& opt) {
    const std::string out_dir = resolve_out_dir(opt.out_dir);
    const l2e::SimulationSpec spec = sim_spec_from(opt);
    const l2e::Simulation sim = l2e::simulate(spec);

    l2e::Dataset table;
    if (spec.generator == l2e::SimulationSpec::Generator::linear_gaussian) {
        table = sim.data;
        table.column_names.clear();
        for (int j = 1; j <= spec.p; ++j)
            table.column_names.push_back("x" + std::to_string(j));
        table.column_names.push_back("y");
    } else {
        table.X = *sim.truth.sites;
        table.y = sim.data.y;
        table.column_names = {"t", "y"};
    }
    const std::string csv_path = output_path(out_dir, opt.output);
    l2e::write_csv(table, csv_path);

    json truth;
    truth["generator"] = opt.generator;
    truth["n"] = spec.n;
    truth["noise_sd"] = sim.truth.noise_sd;
    truth["outlier_indices"] = sim.truth.outlier_indices;
    truth["outlier_magnitude"] = spec.outlier_magnitude;
    truth["outlier_side"] = opt.side;
    truth["f_values"] = vec_json(sim.truth.f_values);
    truth["sites"] = sim.truth.sites ? vec_json(*sim.truth.sites) : json();
    truth["beta_star"] =
        sim.truth.beta_star ? vec_json(*sim.truth.beta_star) : json();
    truth["tau_star"] =
        spec.generator == l2e::SimulationSpec::Generator::linear_gaussian
            ? json(spec.tau_star)
            : json();
    truth["seed"] = spec.seed;
    const std::string truth_path = output_path(out_dir, opt.truth);
    write_text(truth_path, truth.dump(2) + "\n");

    const l2e::RunManifest manifest =
        make_manifest("simulate", spec.seed, sim_options_json(opt), {});
    l2e::write_manifest_sidecar(manifest, csv_path);
    l2e::write_manifest_sidecar(manifest, truth_path);
    return 0;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchOptions {
    std::string generator = "cubic";  // cubic | quartic
    int n = 500;
    std::vector<int> levels = {10, 50};
    int trials = 20;
    std::uint64_t seed = 0;
    double magnitude = 10.0;
    int threads = 1;
    double tol = 1e-6;
    int max_outer = 5000;
    std::string output = "benchmark.csv";
    std::string out_dir;
};

json bench_options_json(const BenchOptions& o) {
    return json{{"generator", o.generator},
                {"n", o.n},
                {"levels", o.levels},
                {"trials", o.trials},
                {"seed", o.seed},
                {"magnitude", o.magnitude},
                {"threads", o.threads},
                {"tol", o.tol},
                {"max_outer", o.max_outer},
                {"output", o.output},
                {"out_dir", resolve_out_dir(o.out_dir)}};
}

BenchOptions bench_options_from(const json& j) {
    BenchOptions o;
    o.generator = j.at("generator").get<std::string>();
    o.n = j.at("n").get<int>();
    o.levels = j.at("levels").get<std::vector<int>>();
    o.trials = j.at("trials").get<int>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.magnitude = j.at("magnitude").get<double>();
    o.threads = j.at("threads").get<int>();
    o.tol = j.at("tol").get<double>();
    o.max_outer = j.at("max_outer").get<int>();
    o.output = j.at("output").get<std::string>();
    o.out_dir = j.at("out_dir").get<std::string>();
    return o;
}

struct BenchRow {
    std::string estimator;
    int level = 0;
    int trial = 0;
    double mse = 0.0;
};

int run_benchmark(const BenchOptions& opt) {
    if (opt.generator != "cubic" && opt.generator != "quartic")
        throw l2e::InvalidArgument("benchmark generator must be cubic or quartic");
    if (opt.trials < 1) throw l2e::InvalidArgument("trials must be >= 1");
    if (opt.levels.empty())
        throw l2e::InvalidArgument("need at least one outlier level");
    for (const int level : opt.levels)
        if (level < 0 || level >= opt.n)
            throw l2e::InvalidArgument("outlier level " + std::to_string(level) +
                                       " must lie in [0, n)");
    if (opt.threads < 1) throw l2e::InvalidArgument("threads must be >= 1");
    const bool cubic = opt.generator == "cubic";
    const std::string out_dir = resolve_out_dir(opt.out_dir);

    struct Job {
        int level_index;
        int trial;
    };
    std::vector<Job> jobs;
    for (int li = 0; li < static_cast<int>(opt.levels.size()); ++li)
        for (int trial = 0; trial < opt.trials; ++trial)
            jobs.push_back({li, trial});

    std::vector<BenchRow> rows(jobs.size() * 2);
    std::exception_ptr failure;
    std::mutex failure_mutex;

    // Each job owns two preallocated result slots, so workers share no
    // mutable state; the per-trial seed depends only on (level, trial).
    auto worker = [&](int w) {
        for (std::size_t k = static_cast<std::size_t>(w); k < jobs.size();
             k += static_cast<std::size_t>(opt.threads)) {
            try {
                const Job& job = jobs[k];
                l2e::SimulationSpec spec;
                spec.generator =
                    cubic ? l2e::SimulationSpec::Generator::identity_design_cubic
                          : l2e::SimulationSpec::Generator::identity_design_quartic;
                spec.n = opt.n;
                spec.n_outliers = opt.levels[static_cast<std::size_t>(job.level_index)];
                spec.outlier_magnitude = opt.magnitude;
                spec.seed = l2e::splitmix64(
                    opt.seed ^
                    (static_cast<std::uint64_t>(job.level_index) << 32) ^
                    static_cast<std::uint64_t>(job.trial));
                const l2e::Simulation sim = l2e::simulate(spec);

                const l2e::Vector mle =
                    cubic ? l2e::isotonic_mle(sim.data.y)
                          : l2e::convex_mle(sim.data.y, *sim.truth.sites);
                l2e::FitConfig cfg;
                cfg.tol = opt.tol;
                cfg.max_outer_iter = opt.max_outer;
                const l2e::ConstraintSpec cons =
                    cubic ? l2e::ConstraintSpec::isotonic()
                          : l2e::ConstraintSpec::convex_shape(*sim.truth.sites);
                const l2e::FitResult res = l2e::fit(sim.data, cons, cfg);

                const auto mse = [&](const l2e::Vector& est) {
                    return (est - sim.truth.f_values).squaredNorm() / spec.n;
                };
                rows[2 * k] = {"l2e", spec.n_outliers, job.trial,
                               mse(res.theta_hat.beta)};
                rows[2 * k + 1] = {"mle", spec.n_outliers, job.trial, mse(mle)};
            } catch (...) {
                const std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    if (opt.threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < opt.threads; ++w) pool.emplace_back(worker, w);
        for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
        return std::tie(a.estimator, a.level, a.trial) <
               std::tie(b.estimator, b.level, b.trial);
    });
    std::string body = "estimator,outlier_level,trial,mse\n";
    for (const BenchRow& row : rows)
        body += row.estimator + "," + std::to_string(row.level) + "," +
                std::to_string(row.trial) + "," + fmt17(row.mse) + "\n";

    const std::string path = output_path(out_dir, opt.output);
    write_text(path, body);
    l2e::write_manifest_sidecar(
        make_manifest("benchmark", opt.seed, bench_options_json(opt), {}), path);
    return 0;
}

// ---------------------------------------------------------------------------
// path

struct PathOptions {
    std::string input;     // "" = simulate instead
    std::string response;  // "" = last column
    bool header = true;
    int grid = 50;
    bool standardize = true;
    int n = 200;
    int p = 8;
    double tau_star = 2.0;
    int outliers = 0;
    std::string side = "design";
    double magnitude = 10.0;
    std::uint64_t seed = 0;
    double tol = 1e-6;
    int max_outer = 2000;
    std::string output = "path.csv";
    std::string out_dir;
};

json path_options_json(const PathOptions& o) {
    return json{{"input", o.input},
                {"response", o.response},
                {"header", o.header},
                {"grid", o.grid},
                {"standardize", o.standardize},
                {"n", o.n},
                {"p", o.p},
                {"tau_star", o.tau_star},
                {"outliers", o.outliers},
                {"side", o.side},
                {"magnitude", o.magnitude},
                {"seed", o.seed},
                {"tol", o.tol},
                {"max_outer", o.max_outer},
                {"output", o.output},
                {"out_dir", resolve_out_dir(o.out_dir)}};
}

PathOptions path_options_from(const json& j) {
    PathOptions o;
    o.input = j.at("input").get<std::string>();
    o.response = j.at("response").get<std::string>();
    o.header = j.at("header").get<bool>();
    o.grid = j.at("grid").get<int>();
    o.standardize = j.at("standardize").get<bool>();
    o.n = j.at("n").get<int>();
    o.p = j.at("p").get<int>();
    o.tau_star = j.at("tau_star").get<double>();
    o.outliers = j.at("outliers").get<int>();
    o.side = j.at("side").get<std::string>();
    o.magnitude = j.at("magnitude").get<double>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.tol = j.at("tol").get<double>();
    o.max_outer = j.at("max_outer").get<int>();
    o.output = j.at("output").get<std::string>();
    o.out_dir = j.at("out_dir").get<std::string>();
    return o;
}

int run_path(const PathOptions& opt) {
    const std::string out_dir = resolve_out_dir(opt.out_dir);
    std::vector<std::pair<std::string, std::string>> digests;
    l2e::Dataset raw;
    if (!opt.input.empty()) {
        digests.emplace_back(opt.input, l2e::fnv1a_file_digest(opt.input));
        raw = l2e::load_csv(opt.input, response_ref(opt.response, opt.input),
                            opt.header);
    } else {
        SimOptions sim_opt;
        sim_opt.generator = "linear";
        sim_opt.n = opt.n;
        sim_opt.p = opt.p;
        sim_opt.tau_star = opt.tau_star;
        sim_opt.outliers = opt.outliers;
        sim_opt.side = opt.side;
        sim_opt.magnitude = opt.magnitude;
        sim_opt.seed = opt.seed;
        raw = l2e::simulate(sim_spec_from(sim_opt)).data;
    }
    const l2e::Dataset data = opt.standardize ? l2e::standardize(raw) : raw;

    l2e::FitConfig cfg;
    cfg.tol = opt.tol;
    cfg.max_outer_iter = opt.max_outer;
    const l2e::PathResult robust = l2e::solution_path(
        data.X, data.y, l2e::EstimatorTag::l2e_sparse, opt.grid, cfg);
    const l2e::PathResult lasso = l2e::solution_path(
        data.X, data.y, l2e::EstimatorTag::lasso_mle, opt.grid, cfg);

    // Rows ordered by (estimator, grid index, coefficient index);
    // "l2e_sparse" sorts before "lasso_mle".
    std::string body = "estimator,s,coefficient_index,value\n";
    for (const l2e::PathResult* pr : {&robust, &lasso}) {
        const std::string tag = l2e::to_string(pr->estimator_tag);
        for (int g = 0; g < opt.grid; ++g)
            for (Eigen::Index j = 0; j < pr->coefficient_matrix.rows(); ++j)
                body += tag + "," + fmt17(pr->shrinkage_grid[g]) + "," +
                        std::to_string(j) + "," +
                        fmt17(pr->coefficient_matrix(j, g)) + "\n";
    }

    const std::string path = output_path(out_dir, opt.output);
    write_text(path, body);
    l2e::write_manifest_sidecar(
        make_manifest("path", opt.seed, path_options_json(opt), digests), path);
    return 0;
}

// ---------------------------------------------------------------------------
// replay

int run_replay(const std::string& manifest_path,
               const std::string& out_dir_override) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in)
        throw l2e::DataError(l2e::DataError::Code::missing_file,
                             "cannot open \"" + manifest_path + "\"");
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw l2e::DataError(l2e::DataError::Code::bad_format,
                             "manifest is not valid JSON: " + std::string(e.what()));
    }
    try {
        const std::string command = m.at("command").get<std::string>();
        json config = m.at("config");
        if (!out_dir_override.empty()) config["out_dir"] = out_dir_override;
        if (m.contains("input_digests"))
            for (const auto& [file, digest] : m.at("input_digests").items()) {
                try {
                    if (l2e::fnv1a_file_digest(file) != digest.get<std::string>())
                        std::fprintf(stderr,
                                     "warning: %s changed since the original run\n",
                                     file.c_str());
                } catch (const l2e::DataError&) {
                    std::fprintf(stderr, "warning: input %s is missing\n",
                                 file.c_str());
                }
            }
        if (command == "fit") return run_fit(fit_options_from(config));
        if (command == "simulate") return run_simulate(sim_options_from(config));
        if (command == "benchmark")
            return run_benchmark(bench_options_from(config));
        if (command == "path") return run_path(path_options_from(config));
        throw l2e::DataError(l2e::DataError::Code::bad_format,
                             "manifest names unknown command '" + command + "'");
    } catch (const json::exception& e) {
        throw l2e::DataError(l2e::DataError::Code::bad_format,
                             "malformed manifest: " + std::string(e.what()));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"robust structured regression via the L2 criterion"};
    app.set_version_flag("--version", l2e::kVersion);
    app.require_subcommand(1);
    app.footer("Output directory: --out-dir, else $L2E_OUT_DIR, else the "
               "current directory.\nExit codes: 0 success, 1 usage error, 2 "
               "data error, 3 numerical failure.");

    FitOptions fit_opt;
    SimOptions sim_opt;
    BenchOptions bench_opt;
    PathOptions path_opt;
    std::string manifest_path;
    std::string replay_out_dir;
    int rc = 0;

    CLI::App* fit = app.add_subcommand("fit", "fit the robust model to a CSV");
    fit->add_option("--input", fit_opt.input, "input CSV path")->required();
    fit->add_option("--response", fit_opt.response,
                    "response column name or 0-based index (default: last)");
    fit->add_flag("--header,!--no-header", fit_opt.header,
                  "first row is a header (default on)");
    fit->add_option("--constraint", fit_opt.constraint,
                    "none | l1:LAMBDA | l1ball:RADIUS | isotonic | convex")
        ->capture_default_str();
    fit->add_flag("--standardize,!--no-standardize", fit_opt.standardize,
                  "standardize X and center y before a linear fit; "
                  "coefficients are reported on the original scale "
                  "(default on; shape fits never standardize)");
    fit->add_option("--output", fit_opt.output, "result JSON name")
        ->capture_default_str();
    fit->add_option("--residuals", fit_opt.residuals,
                    "also write a fitted/residual/weight CSV with this name");
    fit->add_option("--out-dir", fit_opt.out_dir, "output directory");
    fit->add_flag("--verbose", fit_opt.verbose,
                  "print one objective line per outer iteration to stderr");
    add_solver_flags(fit, fit_opt.solver);
    fit->callback([&] { rc = run_fit(fit_opt); });

    CLI::App* sim = app.add_subcommand("simulate", "write a synthetic dataset");
    sim->add_option("--generator", sim_opt.generator, "cubic | quartic | linear")
        ->capture_default_str();
    sim->add_option("--n", sim_opt.n, "number of observations")
        ->capture_default_str();
    sim->add_option("--outliers", sim_opt.outliers, "contaminated count")
        ->capture_default_str();
    sim->add_option("--magnitude", sim_opt.magnitude,
                    "outlier size in noise SDs")
        ->capture_default_str();
    sim->add_option("--side", sim_opt.side, "response | design | both")
        ->capture_default_str();
    sim->add_option("--p", sim_opt.p, "predictors (linear generator)")
        ->capture_default_str();
    sim->add_option("--beta-star", sim_opt.beta_star,
                    "true coefficients, comma separated (default: all ones)")
        ->delimiter(',');
    sim->add_option("--tau-star", sim_opt.tau_star,
                    "true noise precision (linear generator)")
        ->capture_default_str();
    sim->add_option("--seed", sim_opt.seed, "RNG seed")->capture_default_str();
    sim->add_option("--output", sim_opt.output, "dataset CSV name")
        ->capture_default_str();
    sim->add_option("--truth", sim_opt.truth, "ground-truth JSON name")
        ->capture_default_str();
    sim->add_option("--out-dir", sim_opt.out_dir, "output directory");
    sim->callback([&] { rc = run_simulate(sim_opt); });

    CLI::App* bench = app.add_subcommand(
        "benchmark", "per-trial MSE of the robust fit vs the shape-constrained "
                     "least-squares fit on contaminated data");
    bench->add_option("--generator", bench_opt.generator, "cubic | quartic")
        ->capture_default_str();
    bench->add_option("--n", bench_opt.n, "observations per trial")
        ->capture_default_str();
    bench->add_option("--levels", bench_opt.levels,
                      "outlier counts, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--trials", bench_opt.trials, "trials per level")
        ->capture_default_str();
    bench->add_option("--seed", bench_opt.seed, "base seed")
        ->capture_default_str();
    bench->add_option("--magnitude", bench_opt.magnitude,
                      "outlier size in noise SDs")
        ->capture_default_str();
    bench->add_option("--threads", bench_opt.threads,
                      "worker threads (output is identical for any value)")
        ->capture_default_str();
    bench->add_option("--tol", bench_opt.tol, "solver tolerance")
        ->capture_default_str();
    bench->add_option("--max-outer", bench_opt.max_outer,
                      "solver outer iteration budget")
        ->capture_default_str();
    bench->add_option("--output", bench_opt.output, "result CSV name")
        ->capture_default_str();
    bench->add_option("--out-dir", bench_opt.out_dir, "output directory");
    bench->callback([&] { rc = run_benchmark(bench_opt); });

    CLI::App* path = app.add_subcommand(
        "path", "lasso and robust sparse-regression solution paths");
    path->add_option("--input", path_opt.input,
                     "input CSV (omit to simulate linear data)");
    path->add_option("--response", path_opt.response,
                     "response column name or 0-based index (default: last)");
    path->add_flag("--header,!--no-header", path_opt.header,
                   "first row is a header (default on)");
    path->add_option("--grid", path_opt.grid, "shrinkage grid size")
        ->capture_default_str();
    path->add_flag("--standardize,!--no-standardize", path_opt.standardize,
                   "standardize before fitting; path values stay on the "
                   "standardized scale (default on)");
    path->add_option("--n", path_opt.n, "simulated observations")
        ->capture_default_str();
    path->add_option("--p", path_opt.p, "simulated predictors")
        ->capture_default_str();
    path->add_option("--tau-star", path_opt.tau_star,
                     "simulated noise precision")
        ->capture_default_str();
    path->add_option("--outliers", path_opt.outliers, "contaminated rows")
        ->capture_default_str();
    path->add_option("--side", path_opt.side, "response | design | both")
        ->capture_default_str();
    path->add_option("--magnitude", path_opt.magnitude,
                     "outlier size in noise SDs")
        ->capture_default_str();
    path->add_option("--seed", path_opt.seed, "RNG seed")->capture_default_str();
    path->add_option("--tol", path_opt.tol, "solver tolerance")
        ->capture_default_str();
    path->add_option("--max-outer", path_opt.max_outer,
                     "solver outer iteration budget")
        ->capture_default_str();
    path->add_option("--output", path_opt.output, "result CSV name")
        ->capture_default_str();
    path->add_option("--out-dir", path_opt.out_dir, "output directory");
    path->callback([&] { rc = run_path(path_opt); });

    CLI::App* replay =
        app.add_subcommand("replay", "re-run a command from a manifest sidecar");
    replay->add_option("--manifest", manifest_path, "manifest JSON path")
        ->required();
    replay->add_option("--out-dir", replay_out_dir,
                       "override the recorded output directory");
    replay->callback([&] { rc = run_replay(manifest_path, replay_out_dir); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const l2e::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const l2e::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const l2e::Error& e) {
        // data, dimension, and constraint problems
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return rc;
}
