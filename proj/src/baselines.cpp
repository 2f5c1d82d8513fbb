#include "l2e/baselines.hpp"

#include <cmath>

#include <Eigen/QR>

#include "l2e/core.hpp"
#include "l2e/errors.hpp"
#include "l2e/prox.hpp"

namespace l2e {

namespace {

constexpr double kLsTol = 1e-8;
constexpr int kLsMaxIter = 50000;

Vector radius_grid(double full_norm, int grid_size) {
    if (grid_size < 2) throw InvalidArgument("grid_size must be at least 2");
    Vector t(grid_size);
    for (int g = 0; g < grid_size; ++g)
        t[g] = full_norm * static_cast<double>(g) /
               static_cast<double>(grid_size - 1);
    return t;
}

}  // namespace

std::string to_string(EstimatorTag tag) {
    return tag == EstimatorTag::lasso_mle ? "lasso_mle" : "l2e_sparse";
}

Vector ols_fit(const Matrix& X, const Vector& y) {
    if (X.rows() != y.size())
        throw DimensionError("ols_fit: row count does not match response");
    if (X.rows() < X.cols())
        throw InvalidArgument("ols_fit: fewer observations than coefficients");
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    if (qr.rank() < X.cols())
        throw InvalidArgument("ols_fit: design matrix is rank-deficient");
    return qr.solve(y);
}

Vector isotonic_mle(const Vector& y) { return project_isotonic(y); }

Vector convex_mle(const Vector& y) { return project_convex_cone(y); }

Vector convex_mle(const Vector& y, const Vector& sites) {
    return project_convex_cone(y, sites);
}

Vector lasso_constrained_ls(const Matrix& X, const Vector& y, double radius,
                            const Vector& warm_start) {
    if (X.rows() != y.size())
        throw DimensionError("lasso_constrained_ls: inconsistent dimensions");
    if (!(radius >= 0.0))
        throw InvalidArgument("lasso_constrained_ls: radius must be >= 0");
    Vector beta = warm_start.size() == 0 ? Vector::Zero(X.cols()) : warm_start;
    if (beta.size() != X.cols())
        throw DimensionError("lasso_constrained_ls: warm start has wrong size");
    beta = project_l1_ball(beta, radius);
    const double sigma = spectral_norm(X);
    if (!(sigma > 0.0))
        throw InvalidArgument("lasso_constrained_ls: zero design matrix");
    const double step = 1.0 / (sigma * sigma);
    Vector r = y - X * beta;
    double obj = 0.5 * r.squaredNorm();
    for (int it = 0; it < kLsMaxIter; ++it) {
        beta = project_l1_ball(beta + step * (X.transpose() * r), radius);
        r = y - X * beta;
        const double next = 0.5 * r.squaredNorm();
        const bool done = std::abs(obj - next) / (1.0 + std::abs(obj)) < kLsTol;
        obj = next;
        if (done) break;
    }
    return beta;
}

PathResult solution_path(const Matrix& X, const Vector& y, EstimatorTag tag,
                         int grid_size, const FitConfig& cfg) {
    PathResult path;
    path.estimator_tag = tag;
    path.coefficient_matrix.resize(X.cols(), grid_size);
    path.shrinkage_grid.resize(grid_size);

    Vector full;           // unconstrained solution of the tagged estimator
    Theta warm_theta;      // carried along the robust path
    if (tag == EstimatorTag::lasso_mle) {
        full = ols_fit(X, y);
    } else {
        Dataset data;
        data.X = X;
        data.y = y;
        const FitResult res = fit(data, ConstraintSpec::none(), cfg);
        full = res.theta_hat.beta;
        warm_theta = res.theta_hat;
    }
    const double full_norm = full.lpNorm<1>();
    const Vector radii = radius_grid(full_norm, grid_size);

    Vector warm = full;
    for (int g = grid_size - 1; g >= 0; --g) {
        try {
            if (tag == EstimatorTag::lasso_mle) {
                warm = lasso_constrained_ls(X, y, radii[g], warm);
            } else {
                Dataset data;
                data.X = X;
                data.y = y;
                FitConfig warm_cfg = cfg;
                warm_cfg.init_mode = InitMode::user;
                warm_theta.beta = warm;
                warm_cfg.init = warm_theta;
                const FitResult res =
                    fit(data, ConstraintSpec::l1_ball(radii[g]), warm_cfg);
                warm = res.theta_hat.beta;
                warm_theta = res.theta_hat;
            }
        } catch (const Error& e) {
            throw NumericalError(
                std::string("solution_path failed at grid point: ") + e.what(),
                g);
        }
        path.coefficient_matrix.col(g) = warm;
        path.shrinkage_grid[g] =
            full_norm > 0.0 ? warm.lpNorm<1>() / full_norm : 0.0;
    }
    return path;
}

}  // namespace l2e
