// Acceptance gate: one line of output per criterion, exit code = number of
// failures. Each criterion is self-contained and uses its own seeds, so the
// checks can be read and rerun in isolation.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "l2e/baselines.hpp"
#include "l2e/core.hpp"
#include "l2e/dataset.hpp"
#include "l2e/prox.hpp"
#include "l2e/rng.hpp"
#include "l2e/simulate.hpp"
#include "l2e/solver.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using l2e::ConstraintSpec;
using l2e::FitConfig;
using l2e::Matrix;
using l2e::SimulationSpec;
using l2e::Vector;
using clock_type = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string note;
};

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* format, ...) {
    char buf[256];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

// Dense second-difference constraint matrix matching the library's row
// normalization; drives the small-n QP oracle.
Matrix curvature_matrix(int n, const Vector* sites) {
    if (n < 3) return Matrix(0, n);
    Matrix D = Matrix::Zero(n - 2, n);
    for (int i = 1; i + 1 < n; ++i) {
        if (sites == nullptr) {
            D(i - 1, i - 1) = 1.0;
            D(i - 1, i) = -2.0;
            D(i - 1, i + 1) = 1.0;
        } else {
            const double h_left = (*sites)[i] - (*sites)[i - 1];
            const double h_right = (*sites)[i + 1] - (*sites)[i];
            const double s = 0.5 * (h_left + h_right);
            D(i - 1, i - 1) = h_right / s;
            D(i - 1, i) = -(h_left + h_right) / s;
            D(i - 1, i + 1) = h_left / s;
        }
    }
    return D;
}

// --- criterion 1: analytic gradients match central finite differences ----

Outcome criterion_gradients() {
    const auto start = clock_type::now();
    l2e::Rng rng(101);
    double worst_beta = 0.0, worst_tau = 0.0;
    for (int k = 0; k < 100; ++k) {
        const int n = 2 + static_cast<int>(rng.uniform_int(49));
        const int p = 1 + static_cast<int>(rng.uniform_int(10));
        const Matrix X = oracles::random_matrix(rng, n, p);
        const Vector beta = oracles::random_vector(rng, p);
        const Vector y = X * beta + oracles::random_vector(rng, n);
        const double tau = 0.3 + 1.2 * rng.uniform();
        const Vector r = l2e::residuals(X, y, beta);
        const Vector w = l2e::weights(r, tau);

        const Vector fd_b = oracles::fd_grad_beta(X, y, beta, tau);
        const Vector g_b = l2e::grad_beta(X, r, w, tau);
        worst_beta = std::max(worst_beta,
                              (g_b - fd_b).lpNorm<Eigen::Infinity>() /
                                  std::max(1e-4, fd_b.lpNorm<Eigen::Infinity>()));

        const double fd_t = oracles::fd_grad_tau(r, tau);
        const double g_t = l2e::grad_tau(r, w, tau);
        worst_tau = std::max(worst_tau,
                             std::abs(g_t - fd_t) / std::max(1e-4, std::abs(fd_t)));
    }
    const double elapsed = seconds_since(start);
    Outcome out;
    out.pass = worst_beta < 1e-5 && worst_tau < 1e-5 && elapsed < 5.0;
    out.note = fmt("100 instances, max rel err beta %.1e tau %.1e", worst_beta,
                   worst_tau);
    return out;
}

// --- criterion 2: projections match exhaustive / KKT oracles -------------

Outcome criterion_projections() {
    const auto start = clock_type::now();
    l2e::Rng rng(103);

    double worst_iso = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const int n = 2 + static_cast<int>(rng.uniform_int(5));
        const Vector v = oracles::random_vector(rng, n) * 2.0;
        worst_iso = std::max(worst_iso,
                             (l2e::project_isotonic(v) - oracles::isotonic_oracle(v))
                                 .lpNorm<Eigen::Infinity>());
    }

    int ball_failures = 0;
    for (int k = 0; k < 1000; ++k) {
        const int n = 1 + static_cast<int>(rng.uniform_int(12));
        const Vector v = oracles::random_vector(rng, n) * 2.0;
        const double radius = k % 50 == 0 ? 0.0 : 2.0 * rng.uniform();
        if (!oracles::l1_ball_kkt_ok(v, radius, l2e::project_l1_ball(v, radius)))
            ++ball_failures;
    }

    double worst_cone = 0.0;
    for (int k = 0; k < 400; ++k) {
        const int n = 3 + static_cast<int>(rng.uniform_int(3));
        const Vector v = oracles::random_vector(rng, n) * 2.0;
        const bool uniform = rng.uniform() < 0.5;
        Vector sites(n);
        if (uniform) {
            for (int i = 0; i < n; ++i) sites[i] = i;
        } else {
            sites[0] = rng.uniform();
            for (int i = 1; i < n; ++i)
                sites[i] = sites[i - 1] + 0.1 + rng.uniform();
        }
        const Vector fast = uniform ? l2e::project_convex_cone(v)
                                    : l2e::project_convex_cone(v, sites);
        const Vector slow =
            oracles::cone_qp_oracle(v, curvature_matrix(n, uniform ? nullptr : &sites));
        worst_cone = std::max(worst_cone, (fast - slow).lpNorm<Eigen::Infinity>());
    }

    const double elapsed = seconds_since(start);
    Outcome out;
    out.pass = worst_iso < 1e-10 && ball_failures == 0 && worst_cone < 1e-6 &&
               elapsed < 10.0;
    out.note = fmt("isotonic gap %.1e, ball KKT failures %d/1000, cone gap %.1e",
                   worst_iso, ball_failures, worst_cone);
    return out;
}

// --- criterion 3: monotone descent and stationarity across a run matrix --

Outcome criterion_descent_matrix() {
    const int block_sizes[3] = {1, 5, 20};
    int trace_violations = 0, converged = 0, stationarity_failures = 0;
    for (int run = 0; run < 200; ++run) {
        const int kind = run % 5;
        const int steps = block_sizes[(run / 5) % 3];
        const std::uint64_t seed = static_cast<std::uint64_t>(run / 15);

        SimulationSpec sim_spec;
        ConstraintSpec spec;
        FitConfig cfg;
        cfg.n_beta = steps;
        cfg.n_tau = steps;
        if (kind <= 2) {
            sim_spec.generator = SimulationSpec::Generator::linear_gaussian;
            sim_spec.n = 60;
            sim_spec.p = 4;
            sim_spec.n_outliers = 6;
            sim_spec.seed = seed;
            spec = kind == 0   ? ConstraintSpec::none()
                   : kind == 1 ? ConstraintSpec::l1_penalty(0.1)
                               : ConstraintSpec::l1_ball(1.0);
            cfg.tol = 1e-8;
            cfg.max_outer_iter = 2000;
        } else {
            sim_spec.generator =
                kind == 3 ? SimulationSpec::Generator::identity_design_cubic
                          : SimulationSpec::Generator::identity_design_quartic;
            sim_spec.n = 40;
            sim_spec.n_outliers = 4;
            sim_spec.seed = seed;
            cfg.tol = 1e-7;
            cfg.max_outer_iter = 5000;
        }
        const auto sim = l2e::simulate(sim_spec);
        if (kind == 3) spec = ConstraintSpec::isotonic();
        if (kind == 4) spec = ConstraintSpec::convex_shape(*sim.truth.sites);

        const auto res = l2e::fit(sim.data, spec, cfg);
        for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
            if (res.objective_trace[i] > res.objective_trace[i - 1] + 1e-10)
                ++trace_violations;
        if (res.converged) {
            ++converged;
            if (!l2e::check_stationarity(sim.data, spec, res.theta_hat,
                                         10.0 * cfg.tol, cfg))
                ++stationarity_failures;
        }
    }
    Outcome out;
    out.pass = trace_violations == 0 && stationarity_failures == 0 &&
               converged > 0;
    out.note = fmt("200 runs: %d trace violations, %d converged, "
                   "%d stationarity failures",
                   trace_violations, converged, stationarity_failures);
    return out;
}

// --- criteria 4 and 5: shape-constrained robustness benchmarks -----------

Outcome criterion_shape_benchmark(bool convex, double time_cap) {
    const auto start = clock_type::now();
    std::vector<double> med_l2e, med_mle;
    for (int level_index = 0; level_index < 2; ++level_index) {
        const int level = level_index == 0 ? 10 : 50;
        std::vector<double> mse_l2e, mse_mle;
        for (int trial = 0; trial < 20; ++trial) {
            SimulationSpec spec;
            spec.generator =
                convex ? SimulationSpec::Generator::identity_design_quartic
                       : SimulationSpec::Generator::identity_design_cubic;
            spec.n = 500;
            spec.n_outliers = level;
            spec.seed = l2e::splitmix64(
                2024ull ^ (static_cast<std::uint64_t>(level_index) << 32) ^
                static_cast<std::uint64_t>(trial));
            const auto sim = l2e::simulate(spec);
            const Vector& f = sim.truth.f_values;
            const Vector mle = convex ? l2e::convex_mle(sim.data.y, *sim.truth.sites)
                                      : l2e::isotonic_mle(sim.data.y);
            FitConfig cfg;
            cfg.tol = 1e-6;
            cfg.max_outer_iter = 5000;
            const auto constraint =
                convex ? ConstraintSpec::convex_shape(*sim.truth.sites)
                       : ConstraintSpec::isotonic();
            const auto res = l2e::fit(sim.data, constraint, cfg);
            mse_l2e.push_back((res.theta_hat.beta - f).squaredNorm() / spec.n);
            mse_mle.push_back((mle - f).squaredNorm() / spec.n);
        }
        med_l2e.push_back(median(mse_l2e));
        med_mle.push_back(median(mse_mle));
    }
    const double elapsed = seconds_since(start);
    Outcome out;
    out.pass = med_l2e[0] < med_mle[0] && med_l2e[1] < med_mle[1] &&
               med_l2e[1] < med_mle[0] && elapsed < time_cap;
    out.note = fmt("median mse (l2e vs mle)@10: %.4f/%.4f, @50: %.4f/%.4f",
                   med_l2e[0], med_mle[0], med_l2e[1], med_mle[1]);
    return out;
}

// --- criterion 6: clean-data agreement with the constrained MLE ----------

Outcome criterion_clean_agreement() {
    double worst = 0.0;
    for (int convex = 0; convex < 2; ++convex) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            SimulationSpec spec;
            spec.generator =
                convex ? SimulationSpec::Generator::identity_design_quartic
                       : SimulationSpec::Generator::identity_design_cubic;
            spec.n = 500;
            spec.n_outliers = 0;
            spec.seed = 3000 + seed;
            const auto sim = l2e::simulate(spec);
            const Vector mle = convex ? l2e::convex_mle(sim.data.y, *sim.truth.sites)
                                      : l2e::isotonic_mle(sim.data.y);
            FitConfig cfg;
            cfg.tol = 1e-6;
            cfg.max_outer_iter = 5000;
            const auto constraint =
                convex ? ConstraintSpec::convex_shape(*sim.truth.sites)
                       : ConstraintSpec::isotonic();
            const auto res = l2e::fit(sim.data, constraint, cfg);
            worst = std::max(
                worst, (res.theta_hat.beta - mle).lpNorm<Eigen::Infinity>());
        }
    }
    Outcome out;
    const double limit = 3.0 * 0.1;  // three times the generator noise SD
    out.pass = worst < limit;
    out.note = fmt("worst sup gap %.4f (limit %.2f) over 10 seeds x 2 shapes",
                   worst, limit);
    return out;
}

// --- criterion 7: outlier identification precision and recall ------------

Outcome criterion_outlier_flags() {
    std::vector<double> precisions, recalls;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SimulationSpec spec;
        spec.generator = SimulationSpec::Generator::linear_gaussian;
        spec.n = 500;
        spec.p = 10;
        spec.n_outliers = 50;
        spec.outlier_magnitude = 10.0;
        spec.tau_star = 1.0;
        spec.seed = 7000 + seed;
        const auto sim = l2e::simulate(spec);

        FitConfig cfg;
        cfg.tol = 1e-6;
        cfg.max_outer_iter = 2000;
        // flag weights below exp(-4.5), i.e. standardized residuals past 3
        cfg.outlier_weight_threshold = std::exp(-4.5);
        const auto res = l2e::fit(sim.data, ConstraintSpec::none(), cfg);

        std::vector<char> truth(spec.n, 0);
        for (std::size_t idx : sim.truth.outlier_indices) truth[idx] = 1;
        int tp = 0, fp = 0, fn = 0;
        for (int i = 0; i < spec.n; ++i) {
            const bool flagged = res.outlier_flags[static_cast<std::size_t>(i)];
            if (flagged && truth[static_cast<std::size_t>(i)]) ++tp;
            if (flagged && !truth[static_cast<std::size_t>(i)]) ++fp;
            if (!flagged && truth[static_cast<std::size_t>(i)]) ++fn;
        }
        precisions.push_back(tp + fp == 0 ? 0.0
                                          : static_cast<double>(tp) / (tp + fp));
        recalls.push_back(static_cast<double>(tp) / (tp + fn));
    }
    const double med_p = median(precisions), med_r = median(recalls);
    Outcome out;
    out.pass = med_p >= 0.9 && med_r >= 0.9;
    out.note = fmt("median precision %.3f, median recall %.3f over 20 seeds",
                   med_p, med_r);
    return out;
}

// --- criterion 8: sparse solution paths, clean agreement and robustness --

Outcome criterion_path_agreement() {
    const int n = 3000, p = 8, grid = 21;
    double worst_gap = 0.0;
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SimulationSpec spec;
        spec.generator = SimulationSpec::Generator::linear_gaussian;
        spec.n = n;
        spec.p = p;
        spec.tau_star = 4.0;
        spec.seed = seed;
        spec.beta_star = Vector::Constant(p, 0.35);
        spec.n_outliers = 0;
        const auto clean_sim = l2e::simulate(spec);
        spec.n_outliers = n / 20;  // 5% of design rows inflated tenfold
        spec.outlier_side = SimulationSpec::OutlierSide::design;
        const auto dirty_sim = l2e::simulate(spec);

        FitConfig cfg;
        cfg.tol = 1e-6;
        cfg.max_outer_iter = 2000;
        const l2e::Dataset clean = l2e::standardize(clean_sim.data);
        const l2e::Dataset dirty = l2e::standardize(dirty_sim.data);

        const auto cl_lasso = l2e::solution_path(clean.X, clean.y,
                                                 l2e::EstimatorTag::lasso_mle,
                                                 grid, cfg);
        const auto cl_l2e = l2e::solution_path(clean.X, clean.y,
                                               l2e::EstimatorTag::l2e_sparse,
                                               grid, cfg);
        const auto dt_lasso = l2e::solution_path(dirty.X, dirty.y,
                                                 l2e::EstimatorTag::lasso_mle,
                                                 grid, cfg);
        const auto dt_l2e = l2e::solution_path(dirty.X, dirty.y,
                                               l2e::EstimatorTag::l2e_sparse,
                                               grid, cfg);

        // clean paths are compared on the standardized scale they share
        worst_gap = std::max(
            worst_gap, (cl_lasso.coefficient_matrix - cl_l2e.coefficient_matrix)
                           .cwiseAbs()
                           .maxCoeff());

        // contamination inflates the dirty columns' scales, so dirty-vs-clean
        // deviation is measured on the original scale of each dataset
        const auto original = [](const Matrix& coefs, const l2e::Dataset& d) {
            Matrix m = coefs;
            for (Eigen::Index j = 0; j < m.rows(); ++j)
                m.row(j) /= d.transform->x_scale[j];
            return m;
        };
        const double lasso_dev =
            (original(dt_lasso.coefficient_matrix, dirty) -
             original(cl_lasso.coefficient_matrix, clean))
                .cwiseAbs()
                .maxCoeff();
        const double l2e_dev = (original(dt_l2e.coefficient_matrix, dirty) -
                                original(cl_l2e.coefficient_matrix, clean))
                                   .cwiseAbs()
                                   .maxCoeff();
        if (lasso_dev > l2e_dev) ++wins;
    }
    Outcome out;
    out.pass = worst_gap < 0.05 && wins >= 16;
    out.note = fmt("worst clean-path gap %.4f (limit 0.05), lasso deviates "
                   "more on %d/20 seeds (need 16)",
                   worst_gap, wins);
    return out;
}

// --- criterion 9: byte-identical benchmark runs and manifest replay ------

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(L2E_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_determinism() {
    const fs::path root =
        fs::temp_directory_path() /
        ("l2e_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(root);
    Outcome out;
    const std::string common =
        "benchmark --generator quartic --n 200 --levels 10,25 --trials 6 "
        "--seed 77 --tol 1e-6 --max-outer 2000";
    const int rc1 = run_cli(common + " --threads 1 --out-dir " +
                            (root / "serial").string());
    const int rc2 = run_cli(common + " --threads 4 --out-dir " +
                            (root / "threaded").string());
    const int rc3 = run_cli("replay --manifest " +
                            (root / "serial" / "benchmark.csv.manifest.json").string() +
                            " --out-dir " + (root / "replayed").string());
    const std::string serial = slurp(root / "serial" / "benchmark.csv");
    const std::string threaded = slurp(root / "threaded" / "benchmark.csv");
    const std::string replayed = slurp(root / "replayed" / "benchmark.csv");
    const bool ran = rc1 == 0 && rc2 == 0 && rc3 == 0 && !serial.empty();
    out.pass = ran && serial == threaded && serial == replayed;
    out.note = fmt("exit codes %d/%d/%d, threaded %s, replay %s", rc1, rc2, rc3,
                   serial == threaded && ran ? "identical" : "DIFFERS",
                   serial == replayed && ran ? "identical" : "DIFFERS");
    std::error_code ec;
    fs::remove_all(root, ec);
    return out;
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        const char* name;
        Outcome (*check)();
    };
    // criteria 4 and 5 share one implementation, wrapped to fit the table
    static const auto iso_bench = [] { return criterion_shape_benchmark(false, 120.0); };
    static const auto convex_bench = [] { return criterion_shape_benchmark(true, 300.0); };
    const Criterion criteria[] = {
        {1, "gradient finite-difference agreement", criterion_gradients},
        {2, "projection oracles", criterion_projections},
        {3, "monotone descent and stationarity", criterion_descent_matrix},
        {4, "isotonic robustness benchmark", +iso_bench},
        {5, "convex robustness benchmark", +convex_bench},
        {6, "clean-data agreement with the MLE", criterion_clean_agreement},
        {7, "outlier identification", criterion_outlier_flags},
        {8, "solution-path agreement and robustness", criterion_path_agreement},
        {9, "benchmark determinism and replay", criterion_determinism},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto start = clock_type::now();
        Outcome out;
        try {
            out = c.check();
        } catch (const std::exception& e) {
            out.pass = false;
            out.note = std::string("exception: ") + e.what();
        }
        if (!out.pass) ++failures;
        std::printf("criterion %d %s: %s (%.1fs) %s\n", c.number,
                    out.pass ? "PASS" : "FAIL", c.name, seconds_since(start),
                    out.note.c_str());
        std::fflush(stdout);
    }
    return failures;
}
