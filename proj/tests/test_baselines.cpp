#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "l2e/baselines.hpp"
#include "l2e/errors.hpp"
#include "l2e/prox.hpp"
#include "l2e/simulate.hpp"
#include "oracles.hpp"

using l2e::EstimatorTag;
using l2e::Matrix;
using l2e::Vector;

TEST_CASE("ols_fit: identity, noiseless recovery, pseudoinverse oracle") {
    l2e::Rng rng(201);
    const Vector y = oracles::random_vector(rng, 6);
    CHECK((l2e::ols_fit(Matrix::Identity(6, 6), y) - y).norm() == 0.0);

    const Matrix X = oracles::random_matrix(rng, 40, 5);
    const Vector beta = oracles::random_vector(rng, 5);
    CHECK((l2e::ols_fit(X, X * beta) - beta).lpNorm<Eigen::Infinity>() < 1e-10);

    const Vector noisy = X * beta + oracles::random_vector(rng, 40);
    const Vector est = l2e::ols_fit(X, noisy);
    const Vector ref = X.completeOrthogonalDecomposition().solve(noisy);
    CHECK((est - ref).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("ols_fit: rank deficiency raises") {
    l2e::Rng rng(203);
    Matrix X(10, 2);
    X.col(0) = oracles::random_vector(rng, 10);
    X.col(1) = -3.0 * X.col(0);
    CHECK_THROWS_AS(l2e::ols_fit(X, Vector::Zero(10)), l2e::InvalidArgument);
}

TEST_CASE("shape MLEs are exactly the projections") {
    l2e::Rng rng(207);
    const Vector y = oracles::random_vector(rng, 15);
    CHECK(l2e::isotonic_mle(y) == l2e::project_isotonic(y));
    CHECK(l2e::convex_mle(y) == l2e::project_convex_cone(y));
    Vector sites(15);
    sites[0] = 0.0;
    for (int i = 1; i < 15; ++i) sites[i] = sites[i - 1] + 0.3 + rng.uniform();
    CHECK(l2e::convex_mle(y, sites) == l2e::project_convex_cone(y, sites));
}

TEST_CASE("lasso_constrained_ls: trivial radii") {
    l2e::Rng rng(211);
    const Matrix X = oracles::random_matrix(rng, 30, 4);
    const Vector y = oracles::random_vector(rng, 30);
    const Vector ols = l2e::ols_fit(X, y);

    const Vector loose = l2e::lasso_constrained_ls(X, y, ols.lpNorm<1>() + 1.0);
    // the iteration stops on objective flatness, so coefficients carry a
    // larger residual error than the 1e-8 objective tolerance suggests
    CHECK((loose - ols).lpNorm<Eigen::Infinity>() < 1e-3);
    CHECK(l2e::lasso_constrained_ls(X, y, 0.0).norm() == 0.0);
}

TEST_CASE("lasso_constrained_ls: 2-d grid-search oracle") {
    l2e::Rng rng(213);
    const Matrix X = oracles::random_matrix(rng, 25, 2);
    const Vector y = oracles::random_vector(rng, 25) * 2.0;
    const double radius = 0.8;
    const Vector fast = l2e::lasso_constrained_ls(X, y, radius);
    CHECK(fast.lpNorm<1>() <= radius + 1e-10);

    double best = std::numeric_limits<double>::infinity();
    Vector arg(2);
    for (double a = -radius; a <= radius + 1e-12; a += 1e-3) {
        const double slack = radius - std::abs(a);
        for (double b = -slack; b <= slack + 1e-12; b += 1e-3) {
            Vector cand(2);
            cand << a, b;
            const double sse = (y - X * cand).squaredNorm();
            if (sse < best) {
                best = sse;
                arg = cand;
            }
        }
    }
    CHECK((fast - arg).lpNorm<Eigen::Infinity>() < 2e-3);
}

TEST_CASE("solution_path: endpoints, monotonicity, tags") {
    l2e::SimulationSpec spec;
    spec.generator = l2e::SimulationSpec::Generator::linear_gaussian;
    spec.n = 150;
    spec.p = 4;
    Vector bstar(4);
    bstar << 2.0, 0.0, -1.0, 0.5;
    spec.beta_star = bstar;
    spec.tau_star = 2.0;
    spec.seed = 42;
    const auto sim = l2e::simulate(spec);

    for (EstimatorTag tag : {EstimatorTag::lasso_mle, EstimatorTag::l2e_sparse}) {
        const auto path = l2e::solution_path(sim.data.X, sim.data.y, tag, 11);
        CHECK(path.estimator_tag == tag);
        REQUIRE(path.shrinkage_grid.size() == 11);
        REQUIRE(path.coefficient_matrix.cols() == 11);

        CHECK(path.coefficient_matrix.col(0).norm() == 0.0);  // s = 0
        CHECK(path.shrinkage_grid[0] == 0.0);
        CHECK(path.shrinkage_grid[10] == doctest::Approx(1.0).epsilon(1e-8));

        // s = 1 column is the unconstrained solution of the same estimator
        if (tag == EstimatorTag::lasso_mle) {
            const Vector ols = l2e::ols_fit(sim.data.X, sim.data.y);
            CHECK((path.coefficient_matrix.col(10) - ols)
                      .lpNorm<Eigen::Infinity>() < 1e-6);
        }

        for (int g = 1; g < 11; ++g) {
            CHECK(path.coefficient_matrix.col(g).lpNorm<1>() + 1e-9 >=
                  path.coefficient_matrix.col(g - 1).lpNorm<1>());
            CHECK(path.shrinkage_grid[g] + 1e-9 >= path.shrinkage_grid[g - 1]);
        }
    }

    CHECK(l2e::to_string(EstimatorTag::lasso_mle) == "lasso_mle");
    CHECK(l2e::to_string(EstimatorTag::l2e_sparse) == "l2e_sparse");
    CHECK_THROWS_AS(
        l2e::solution_path(sim.data.X, sim.data.y, EstimatorTag::lasso_mle, 1),
        l2e::InvalidArgument);
}

TEST_CASE("clean-data paths of the two estimators agree closely") {
    l2e::SimulationSpec spec;
    spec.generator = l2e::SimulationSpec::Generator::linear_gaussian;
    spec.n = 800;
    spec.p = 4;
    Vector bstar(4);
    bstar << 1.0, -1.0, 0.5, 0.0;
    spec.beta_star = bstar;
    spec.tau_star = 2.0;
    spec.seed = 314;
    const auto sim = l2e::simulate(spec);

    const auto mle = l2e::solution_path(sim.data.X, sim.data.y,
                                        EstimatorTag::lasso_mle, 9);
    const auto rob = l2e::solution_path(sim.data.X, sim.data.y,
                                        EstimatorTag::l2e_sparse, 9);
    const double gap = (mle.coefficient_matrix - rob.coefficient_matrix)
                           .lpNorm<Eigen::Infinity>();
    CHECK(gap < 0.05);
}
