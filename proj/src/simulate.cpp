#include "l2e/simulate.hpp"

#include <cmath>
#include <string>

#include "l2e/rng.hpp"

namespace l2e {

namespace {

constexpr double kShapeNoiseSd = 0.1;

Vector uniform_sites(int n) {
    Vector t(n);
    if (n == 1) {
        t[0] = -1.0;
        return t;
    }
    for (int i = 0; i < n; ++i) {
        t[i] = -1.0 + 2.0 * i / (n - 1.0);
    }
    return t;
}

}  // namespace

void SimulationSpec::validate() const {
    if (n < 1) {
        throw InvalidArgument("simulation needs n >= 1");
    }
    if (n_outliers < 0 || n_outliers >= n) {
        throw InvalidArgument("outlier count must satisfy 0 <= n_outliers < n");
    }
    if (!(outlier_magnitude > 0.0)) {
        throw InvalidArgument("outlier magnitude must be positive");
    }
    const bool identity = generator != Generator::linear_gaussian;
    if (identity && outlier_side != OutlierSide::response && n_outliers > 0) {
        throw InvalidArgument(
            "design-side outliers require the linear generator");
    }
    if (!identity) {
        if (p < 1) {
            throw InvalidArgument("linear generator needs p >= 1");
        }
        if (beta_star.size() != 0 && beta_star.size() != p) {
            throw DimensionError("beta_star has " + std::to_string(beta_star.size()) +
                                 " entries but p = " + std::to_string(p));
        }
        if (!(tau_star > 0.0)) {
            throw InvalidArgument("tau_star must be positive");
        }
    }
}

Simulation simulate(const SimulationSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Simulation sim;

    const bool identity = spec.generator != SimulationSpec::Generator::linear_gaussian;
    if (identity) {
        const Vector t = uniform_sites(spec.n);
        Vector f(spec.n);
        const bool cubic = spec.generator == SimulationSpec::Generator::identity_design_cubic;
        for (int i = 0; i < spec.n; ++i) {
            f[i] = cubic ? t[i] * t[i] * t[i] : t[i] * t[i] * t[i] * t[i];
        }
        Vector y(spec.n);
        for (int i = 0; i < spec.n; ++i) {
            y[i] = f[i] + kShapeNoiseSd * rng.normal();
        }
        sim.data.X = Matrix::Identity(spec.n, spec.n);
        sim.data.y = y;
        sim.truth.f_values = f;
        sim.truth.sites = t;
        sim.truth.noise_sd = kShapeNoiseSd;
    } else {
        Vector beta = spec.beta_star.size() ? spec.beta_star : Vector::Ones(spec.p);
        Matrix X(spec.n, spec.p);
        for (int i = 0; i < spec.n; ++i) {
            for (int j = 0; j < spec.p; ++j) {
                X(i, j) = rng.normal();
            }
        }
        const double noise_sd = 1.0 / spec.tau_star;
        Vector f = X * beta;
        Vector y(spec.n);
        for (int i = 0; i < spec.n; ++i) {
            y[i] = f[i] + noise_sd * rng.normal();
        }
        sim.data.X = std::move(X);
        sim.data.y = std::move(y);
        sim.truth.f_values = std::move(f);
        sim.truth.beta_star = std::move(beta);
        sim.truth.noise_sd = noise_sd;
    }

    if (spec.n_outliers > 0) {
        sim.truth.outlier_indices =
            rng.sample_distinct(static_cast<std::size_t>(spec.n),
                                static_cast<std::size_t>(spec.n_outliers));
        const bool shift_response =
            spec.outlier_side != SimulationSpec::OutlierSide::design;
        const bool inflate_design =
            spec.outlier_side != SimulationSpec::OutlierSide::response;
        for (const std::size_t idx : sim.truth.outlier_indices) {
            const Eigen::Index i = static_cast<Eigen::Index>(idx);
            if (shift_response) {
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                sim.data.y[i] += sign * spec.outlier_magnitude * sim.truth.noise_sd;
            }
            if (inflate_design) {
                sim.data.X.row(i) *= spec.outlier_magnitude;
            }
        }
    }

    sim.data.validate();
    return sim;
}

}  // namespace l2e
