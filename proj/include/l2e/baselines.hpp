#pragma once

#include <string>

#include "l2e/solver.hpp"
#include "l2e/types.hpp"

namespace l2e {

enum class EstimatorTag { lasso_mle, l2e_sparse };

std::string to_string(EstimatorTag tag);

// Solution path over a grid of L1-ball radii. Column g of
// coefficient_matrix holds the estimate at radius t_g; shrinkage_grid[g] is
// the realized s = ||beta(t_g)||_1 / ||beta_unconstrained||_1, so s = 1
// corresponds to the unconstrained solution of the same estimator.
struct PathResult {
    Vector shrinkage_grid;     // in [0, 1], nondecreasing
    Matrix coefficient_matrix; // p x grid_size
    EstimatorTag estimator_tag = EstimatorTag::lasso_mle;
};

// Ordinary least squares via column-pivoted QR. Rank-deficient designs are
// rejected.
Vector ols_fit(const Matrix& X, const Vector& y);

// Gaussian maximum likelihood under the shape constraint is exactly the
// Euclidean projection of y, so these delegate to the projection routines.
Vector isotonic_mle(const Vector& y);
Vector convex_mle(const Vector& y);
Vector convex_mle(const Vector& y, const Vector& sites);

// Least squares subject to ||beta||_1 <= radius, solved by projected
// gradient with step 1 / sigma(X)^2 from the given start (zeros if empty).
Vector lasso_constrained_ls(const Matrix& X, const Vector& y, double radius,
                            const Vector& warm_start = Vector());

// Evaluates the tagged estimator over a uniform grid of radii from 0 to the
// unconstrained solution's L1 norm, sweeping from the unconstrained end
// down with warm starts. cfg applies to the robust fits only.
PathResult solution_path(const Matrix& X, const Vector& y, EstimatorTag tag,
                         int grid_size, const FitConfig& cfg = {});

}  // namespace l2e
