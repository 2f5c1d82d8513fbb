#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "l2e/dataset.hpp"
#include "l2e/prox.hpp"
#include "l2e/types.hpp"

namespace l2e {

enum class StepMode { auto_lipschitz, fixed };
enum class InitMode { ols, zero, user };

// Control knobs for the alternating block descent. Defaults follow the
// library-wide conventions: a few proximal steps per block, precision kept
// in [1e-2, 1e2], scale-free convergence tolerance.
struct FitConfig {
    int n_beta = 5;   // proximal-gradient steps per beta block
    int n_tau = 5;    // projected-gradient steps per tau block
    double tau_min = 1e-2;
    double tau_max = 1e2;
    int max_outer_iter = 500;
    double tol = 1e-8;  // relative objective-change tolerance

    StepMode step_beta_mode = StepMode::auto_lipschitz;
    // Fixed beta steps are expressed in weighted-least-squares units: step
    // 1 moves beta by X'W r, which for an identity design is exactly the
    // pseudo-observation update z = Wy + (I - W) beta.
    double step_beta = 1.0;
    StepMode step_tau_mode = StepMode::auto_lipschitz;
    double step_tau = 1.0;  // raw step on tau when fixed

    InitMode init_mode = InitMode::ols;
    Theta init;  // used when init_mode == user

    double outlier_weight_threshold = 0.5;  // flag i iff w_i < threshold
    std::uint64_t seed = 0;

    void validate() const;
};

struct FitResult {
    Theta theta_hat;
    Vector weights;                      // final robustness weights
    std::vector<double> objective_trace; // element 0 is the initial objective
    bool converged = false;
    int outer_iterations = 0;
    std::vector<bool> outlier_flags;
    Vector pseudo_response;  // w.*y + (1-w).*fitted at the solution
    double objective = 0.0;
    bool init_fallback = false;  // OLS init requested but design rank-deficient
    int step_halvings = 0;       // safeguard activations across all blocks
};

// h(beta, tau) + J(beta). Indicator kinds return +infinity when beta is
// infeasible beyond a 1e-8 tolerance.
double objective(const Matrix& X, const Vector& y, const Theta& theta,
                 const ConstraintSpec& spec);

// Exactly cfg.n_beta proximal-gradient steps on beta at fixed tau. The
// objective h + J never increases across the block: a step that would
// increase it is retried with halved step size (up to 30 times) and skipped
// if still failing. `sigma_x` may carry a precomputed spectral norm;
// `halvings` and `last_step_norm` report safeguard activity and the size of
// the final accepted step.
Vector update_beta(const Matrix& X, const Vector& y, const Vector& beta,
                   double tau, const ConstraintSpec& spec, const FitConfig& cfg,
                   std::optional<double> sigma_x = std::nullopt,
                   int* halvings = nullptr, double* last_step_norm = nullptr);

// Exactly cfg.n_tau projected-gradient steps on tau at fixed residuals,
// with the same safeguard; the iterate stays in [tau_min, tau_max].
double update_tau(const Vector& r, double tau, const FitConfig& cfg,
                  int* halvings = nullptr, double* last_step_norm = nullptr);

// Alternates update_beta / update_tau. Stops once the relative objective
// change drops below cfg.tol and one further proximal-gradient step on each
// block would move it by less than 9 * cfg.tol (so converged results pass
// check_stationarity at eps = 10 * cfg.tol), or at max_outer_iter.
// Deterministic: identical inputs give bit-identical results.
FitResult fit(const Dataset& data, const ConstraintSpec& spec,
              const FitConfig& cfg = {});

// z_i = w_i y_i + (1 - w_i) beta_i, the convex blend of observation and
// prediction that drives the downweighting of outliers.
Vector pseudo_observations(const Vector& y, const Vector& beta, const Vector& w);

// flags[i] = (w[i] < threshold), threshold in (0, 1), strict comparison.
std::vector<bool> flag_outliers(const Vector& w, double threshold);

// Fixed-point residual test: true iff a single proximal-gradient step on
// beta and a single projected-gradient step on tau each move their block by
// less than eps in Euclidean norm.
bool check_stationarity(const Dataset& data, const ConstraintSpec& spec,
                        const Theta& theta, double eps,
                        const FitConfig& cfg = {});

}  // namespace l2e
