#include "l2e/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/QR>

#include "l2e/core.hpp"
#include "l2e/errors.hpp"
#include "prox_internal.hpp"

namespace l2e {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-8;       // indicator feasibility slack
constexpr double kAscentSlack = 1e-12;  // rounding slack for the safeguard
constexpr int kMaxHalvings = 30;

// Residual / fitted-value kernel with a fast path for the identity design
// used by shape-constrained fits, where X is I_n and every matrix product
// collapses to a copy.
struct ProblemView {
    const Matrix& X;
    const Vector& y;
    bool identity;

    Vector fitted(const Vector& beta) const {
        return identity ? beta : Vector(X * beta);
    }
    Vector residual(const Vector& beta) const {
        return identity ? Vector(y - beta) : Vector(y - X * beta);
    }
    // X' v, the adjoint applied to a residual-space vector.
    Vector adjoint(const Vector& v) const {
        return identity ? v : Vector(X.transpose() * v);
    }
};

bool is_identity_design(const Matrix& X) {
    if (X.rows() != X.cols()) return false;
    return X.isIdentity(0.0);
}

double penalty_value(const ConstraintSpec& spec, const Vector& beta) {
    switch (spec.kind) {
        case ConstraintSpec::Kind::none:
            return 0.0;
        case ConstraintSpec::Kind::l1_penalty:
            return spec.lambda * beta.lpNorm<1>();
        case ConstraintSpec::Kind::l1_ball:
            return beta.lpNorm<1>() <= spec.radius + kFeasTol ? 0.0 : kInf;
        case ConstraintSpec::Kind::isotonic: {
            for (Eigen::Index i = 1; i < beta.size(); ++i)
                if (beta[i] - beta[i - 1] < -kFeasTol) return kInf;
            return 0.0;
        }
        case ConstraintSpec::Kind::convex_shape: {
            if (beta.size() < 3) return 0.0;
            const Vector d = spec.sites ? second_differences(beta, *spec.sites)
                                        : second_differences(beta);
            return d.minCoeff() >= -kFeasTol ? 0.0 : kInf;
        }
    }
    throw ConstraintError("unknown constraint kind");
}

double objective_at(const ProblemView& view, const ConstraintSpec& spec,
                    const Vector& beta, double tau) {
    const double pen = penalty_value(spec, beta);
    if (!std::isfinite(pen)) return kInf;
    return l2e_loss(view.residual(beta), tau) + pen;
}

// Scale factor c such that grad_beta = -c * X' W r. Fixed user steps are
// quoted in units of X' W r, so the true gradient step is step / c.
double gradient_scale(double tau, Eigen::Index n) {
    return tau * tau * tau / static_cast<double>(n) * kSqrt2OverPi;
}

double beta_true_step(const FitConfig& cfg, double sigma_x, double tau,
                      Eigen::Index n) {
    if (cfg.step_beta_mode == StepMode::fixed)
        return cfg.step_beta / gradient_scale(tau, n);
    return 1.0 / lipschitz_beta(sigma_x, tau, n);
}

double tau_step(const FitConfig& cfg, const Vector& r) {
    if (cfg.step_tau_mode == StepMode::fixed) return cfg.step_tau;
    return 1.0 / lipschitz_tau(r, cfg.tau_min, cfg.tau_max);
}

// One safeguarded proximal-gradient step on beta. Returns the accepted
// iterate; `obj` tracks h + J and is updated in place. A step is accepted
// only if the objective does not increase (beyond rounding slack); otherwise
// the step is halved, and after kMaxHalvings failures the point is kept.
Vector safeguarded_beta_step(const ProblemView& view, const ConstraintSpec& spec,
                             const Vector& beta, double tau, double step,
                             double& obj, int& halvings, double& moved,
                             int outer_iter, std::vector<double>* cone_warm) {
    const Vector r = view.residual(beta);
    const Vector w = weights(r, tau);
    const Vector grad = -gradient_scale(tau, view.y.size()) *
                        view.adjoint(w.cwiseProduct(r));
    double t = step;
    for (int attempt = 0; attempt <= kMaxHalvings; ++attempt) {
        const Vector cand = detail::prox_warm(spec, beta - t * grad, t, cone_warm);
        if (!cand.allFinite())
            throw NumericalError("non-finite beta iterate", outer_iter);
        const double cand_obj = objective_at(view, spec, cand, tau);
        if (cand_obj <= obj + kAscentSlack) {
            moved = (cand - beta).norm();
            obj = cand_obj;
            return cand;
        }
        t *= 0.5;
        ++halvings;
    }
    moved = 0.0;
    return beta;
}

double safeguarded_tau_step(const Vector& r, double tau, double step,
                            double tau_min, double tau_max, double& loss,
                            int& halvings, double& moved, int outer_iter) {
    const Vector w = weights(r, tau);
    const double grad = grad_tau(r, w, tau);
    if (!std::isfinite(grad))
        throw NumericalError("non-finite tau gradient", outer_iter);
    double t = step;
    for (int attempt = 0; attempt <= kMaxHalvings; ++attempt) {
        const double cand = project_box(tau - t * grad, tau_min, tau_max);
        const double cand_loss = l2e_loss(r, cand);
        if (cand_loss <= loss + kAscentSlack) {
            moved = std::abs(cand - tau);
            loss = cand_loss;
            return cand;
        }
        t *= 0.5;
        ++halvings;
    }
    moved = 0.0;
    return tau;
}

Vector run_beta_block(const ProblemView& view, const ConstraintSpec& spec,
                      Vector beta, double tau, const FitConfig& cfg,
                      double sigma_x, int& halvings, double& last_moved,
                      int outer_iter, std::vector<double>* cone_warm) {
    const double step = beta_true_step(cfg, sigma_x, tau, view.y.size());
    double obj = objective_at(view, spec, beta, tau);
    last_moved = 0.0;
    for (int s = 0; s < cfg.n_beta; ++s)
        beta = safeguarded_beta_step(view, spec, beta, tau, step, obj, halvings,
                                     last_moved, outer_iter, cone_warm);
    return beta;
}

double run_tau_block(const Vector& r, double tau, const FitConfig& cfg,
                     int& halvings, double& last_moved, int outer_iter) {
    const double step = tau_step(cfg, r);
    double loss = l2e_loss(r, tau);
    last_moved = 0.0;
    for (int s = 0; s < cfg.n_tau; ++s)
        tau = safeguarded_tau_step(r, tau, step, cfg.tau_min, cfg.tau_max,
                                   loss, halvings, last_moved, outer_iter);
    return tau;
}

double median_of(Vector v) {
    const Eigen::Index n = v.size();
    std::nth_element(v.data(), v.data() + n / 2, v.data() + n);
    double hi = v[n / 2];
    if (n % 2 == 0) {
        std::nth_element(v.data(), v.data() + n / 2 - 1, v.data() + n / 2);
        return 0.5 * (hi + v[n / 2 - 1]);
    }
    return hi;
}

// tau0 = 1 / (1.4826 * MAD of the initial residuals), clamped into bounds.
// A zero MAD (perfect initial fit) clamps to tau_max.
double initial_tau(const Vector& r, const FitConfig& cfg) {
    const Vector dev = (r.array() - median_of(r)).abs();
    const double mad = median_of(dev);
    const double scale = 1.4826 * mad;
    if (scale <= 0.0) return cfg.tau_max;
    return project_box(1.0 / scale, cfg.tau_min, cfg.tau_max);
}

// Least-squares init with Mallows-type leverage downweighting: row i gets
// weight 1 / (1 + |x_i|^2 / p). On typical rows this is a mild uniform
// shrink of no consequence, but rows with inflated covariates (leverage
// points) are suppressed, so the starting point is not captured by the
// basin such points create. Clean data gives essentially the OLS start.
Vector ols_solve(const Matrix& X, const Vector& y, bool* rank_deficient) {
    const double p = static_cast<double>(X.cols());
    Vector w(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        w[i] = 1.0 / std::sqrt(1.0 + X.row(i).squaredNorm() / p);
    const Matrix Xw = w.asDiagonal() * X;
    Eigen::ColPivHouseholderQR<Matrix> qr(Xw);
    *rank_deficient = qr.rank() < X.cols();
    if (*rank_deficient) return Vector::Zero(X.cols());
    return qr.solve(w.cwiseProduct(y));
}

Vector initial_beta(const ProblemView& view, const ConstraintSpec& spec,
                    const FitConfig& cfg, bool* fallback,
                    std::vector<double>* cone_warm) {
    *fallback = false;
    Vector beta;
    switch (cfg.init_mode) {
        case InitMode::zero:
            beta = Vector::Zero(view.X.cols());
            break;
        case InitMode::user:
            if (cfg.init.beta.size() != view.X.cols())
                throw DimensionError("user init has wrong coefficient count");
            cfg.init.validate();
            beta = cfg.init.beta;
            break;
        case InitMode::ols:
            if (view.identity) {
                beta = view.y;
            } else {
                bool deficient = false;
                beta = ols_solve(view.X, view.y, &deficient);
                *fallback = deficient;
            }
            break;
    }
    // Indicator constraints start from the projection of the raw init so
    // the initial objective is finite and the residual scale (which seeds
    // tau) reflects a feasible fit.
    if (spec.is_indicator()) beta = detail::prox_warm(spec, beta, 1.0, cone_warm);
    return beta;
}

struct BlockResiduals {
    double beta_moved = 0.0;
    double tau_moved = 0.0;
};

// Measure-only fixed-point test: one safeguarded step per block from theta,
// discarding the iterates. Step sizes are chosen exactly as in fit(), but
// the projection runs cold (no warm state) so fit()'s convergence gate and
// the public check_stationarity measure the same quantity.
BlockResiduals stationarity_residuals(const ProblemView& view,
                                      const ConstraintSpec& spec,
                                      const Vector& beta, double tau,
                                      const FitConfig& cfg, double sigma_x) {
    BlockResiduals out;
    int halvings = 0;
    double obj = objective_at(view, spec, beta, tau);
    safeguarded_beta_step(view, spec, beta, tau,
                          beta_true_step(cfg, sigma_x, tau, view.y.size()),
                          obj, halvings, out.beta_moved, -1, nullptr);
    const Vector r = view.residual(beta);
    double loss = l2e_loss(r, tau);
    safeguarded_tau_step(r, tau, tau_step(cfg, r), cfg.tau_min, cfg.tau_max,
                         loss, halvings, out.tau_moved, -1);
    return out;
}

void check_fit_inputs(const Dataset& data, const ConstraintSpec& spec,
                      const FitConfig& cfg, bool identity) {
    data.validate();
    spec.validate();
    cfg.validate();
    if (spec.is_shape_constraint() && !identity)
        throw ConstraintError(
            "shape constraints require an identity design (one coefficient "
            "per observation)");
    if (spec.kind == ConstraintSpec::Kind::convex_shape && spec.sites &&
        spec.sites->size() != data.X.cols())
        throw DimensionError("constraint sites do not match coefficient count");
}

}  // namespace

void FitConfig::validate() const {
    if (n_beta < 1 || n_tau < 1)
        throw InvalidArgument("block step counts must be at least 1");
    if (!(tau_min > 0.0) || !(tau_max > tau_min))
        throw InvalidArgument("tau bounds must satisfy 0 < tau_min < tau_max");
    if (max_outer_iter < 1) throw InvalidArgument("max_outer_iter must be >= 1");
    if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
    if (step_beta_mode == StepMode::fixed && !(step_beta > 0.0))
        throw InvalidArgument("fixed beta step must be positive");
    if (step_tau_mode == StepMode::fixed && !(step_tau > 0.0))
        throw InvalidArgument("fixed tau step must be positive");
    if (!(outlier_weight_threshold > 0.0) || !(outlier_weight_threshold < 1.0))
        throw InvalidArgument("outlier weight threshold must lie in (0, 1)");
}

double objective(const Matrix& X, const Vector& y, const Theta& theta,
                 const ConstraintSpec& spec) {
    if (X.rows() != y.size() || X.cols() != theta.beta.size())
        throw DimensionError("objective: inconsistent dimensions");
    theta.validate();
    spec.validate();
    const ProblemView view{X, y, is_identity_design(X)};
    return objective_at(view, spec, theta.beta, theta.tau);
}

Vector update_beta(const Matrix& X, const Vector& y, const Vector& beta,
                   double tau, const ConstraintSpec& spec, const FitConfig& cfg,
                   std::optional<double> sigma_x, int* halvings,
                   double* last_step_norm) {
    if (X.rows() != y.size() || X.cols() != beta.size())
        throw DimensionError("update_beta: inconsistent dimensions");
    cfg.validate();
    spec.validate();
    const ProblemView view{X, y, is_identity_design(X)};
    double sx = 1.0;
    if (cfg.step_beta_mode == StepMode::auto_lipschitz && !view.identity)
        sx = sigma_x ? *sigma_x : spectral_norm(X);
    int local_halvings = 0;
    double moved = 0.0;
    Vector out = run_beta_block(view, spec, beta, tau, cfg, sx, local_halvings,
                                moved, 0, nullptr);
    if (halvings) *halvings += local_halvings;
    if (last_step_norm) *last_step_norm = moved;
    return out;
}

double update_tau(const Vector& r, double tau, const FitConfig& cfg,
                  int* halvings, double* last_step_norm) {
    cfg.validate();
    if (r.size() == 0) throw DimensionError("update_tau: empty residual vector");
    int local_halvings = 0;
    double moved = 0.0;
    const double out =
        run_tau_block(r, tau, cfg, local_halvings, moved, 0);
    if (halvings) *halvings += local_halvings;
    if (last_step_norm) *last_step_norm = moved;
    return out;
}

FitResult fit(const Dataset& data, const ConstraintSpec& spec,
              const FitConfig& cfg) {
    const bool identity = is_identity_design(data.X);
    check_fit_inputs(data, spec, cfg, identity);
    const ProblemView view{data.X, data.y, identity};
    const double sigma_x = identity ? 1.0 : spectral_norm(data.X);

    FitResult res;
    res.init_fallback = false;
    // Cone-projection dual multipliers carried across this fit's descent
    // steps; successive inputs are close, so each projection restarts near
    // its solution instead of from scratch. Stationarity measurements and
    // the public block updates run cold.
    std::vector<double> cone_state;
    Vector beta = initial_beta(view, spec, cfg, &res.init_fallback, &cone_state);
    double tau = cfg.init_mode == InitMode::user
                     ? project_box(cfg.init.tau, cfg.tau_min, cfg.tau_max)
                     : initial_tau(view.residual(beta), cfg);

    double obj = objective_at(view, spec, beta, tau);
    res.objective_trace.push_back(obj);

    // Converged iterates must pass check_stationarity at eps = 10 * tol; the
    // gate sits just inside that with the identical step measure.
    const double gate = 9.0 * cfg.tol;
    for (int k = 1; k <= cfg.max_outer_iter; ++k) {
        double moved = 0.0;
        beta = run_beta_block(view, spec, beta, tau, cfg, sigma_x,
                              res.step_halvings, moved, k, &cone_state);
        const Vector r = view.residual(beta);
        tau = run_tau_block(r, tau, cfg, res.step_halvings, moved, k);
        const double prev = obj;
        obj = objective_at(view, spec, beta, tau);
        if (!std::isfinite(obj) && std::isfinite(prev))
            throw NumericalError("objective became non-finite", k);
        res.objective_trace.push_back(obj);
        res.outer_iterations = k;
        if (std::abs(obj - prev) / (1.0 + std::abs(prev)) < cfg.tol) {
            const BlockResiduals fp =
                stationarity_residuals(view, spec, beta, tau, cfg, sigma_x);
            if (fp.beta_moved < gate && fp.tau_moved < gate) {
                res.converged = true;
                break;
            }
        }
    }

    res.theta_hat.beta = beta;
    res.theta_hat.tau = tau;
    const Vector r = view.residual(beta);
    res.weights = weights(r, tau);
    res.outlier_flags = flag_outliers(res.weights, cfg.outlier_weight_threshold);
    res.pseudo_response = pseudo_observations(data.y, view.fitted(beta),
                                              res.weights);
    res.objective = obj;
    return res;
}

Vector pseudo_observations(const Vector& y, const Vector& beta,
                           const Vector& w) {
    if (y.size() != beta.size() || y.size() != w.size())
        throw DimensionError("pseudo_observations: inconsistent dimensions");
    return w.cwiseProduct(y) + (Vector::Ones(y.size()) - w).cwiseProduct(beta);
}

std::vector<bool> flag_outliers(const Vector& w, double threshold) {
    if (!(threshold > 0.0) || !(threshold < 1.0))
        throw InvalidArgument("outlier weight threshold must lie in (0, 1)");
    std::vector<bool> flags(static_cast<size_t>(w.size()));
    for (Eigen::Index i = 0; i < w.size(); ++i) flags[i] = w[i] < threshold;
    return flags;
}

bool check_stationarity(const Dataset& data, const ConstraintSpec& spec,
                        const Theta& theta, double eps, const FitConfig& cfg) {
    const bool identity = is_identity_design(data.X);
    check_fit_inputs(data, spec, cfg, identity);
    theta.validate();
    if (theta.beta.size() != data.X.cols())
        throw DimensionError("check_stationarity: coefficient count mismatch");
    if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
    const ProblemView view{data.X, data.y, identity};
    const double sigma_x = identity ? 1.0 : spectral_norm(data.X);
    const BlockResiduals fp = stationarity_residuals(view, spec, theta.beta,
                                                     theta.tau, cfg, sigma_x);
    return fp.beta_moved < eps && fp.tau_moved < eps;
}

}  // namespace l2e
