#pragma once

#include "l2e/types.hpp"

namespace l2e {

// All operations in this header are pure: no shared state, safe to call
// concurrently on shared read-only inputs. Non-finite inputs are rejected
// with structured errors instead of propagating NaN.

inline constexpr double kSqrt2OverPi = 0.79788456080286535588;    // sqrt(2/pi)
inline constexpr double kHalfInvSqrtPi = 0.28209479177387814347;  // 1/(2 sqrt(pi))

// r_i = y_i - x_i' beta.
Vector residuals(const Matrix& X, const Vector& y, const Vector& beta);

// Gaussian robustness weights w_i = exp(-tau^2 r_i^2 / 2), clamped into
// (0, 1] so that extreme residuals never produce an exact zero.
Vector weights(const Vector& r, double tau);

// Averaged loss
//   h = tau/(2 sqrt(pi)) - (tau/n) sqrt(2/pi) sum_i exp(-tau^2 r_i^2 / 2).
double l2e_loss(const Vector& r, double tau);

// Exact derivative of l2e_loss with respect to beta:
//   -(tau^3/n) sqrt(2/pi) X' W r,  W = diag(w).
// The constant is pinned by the finite-difference consistency tests.
Vector grad_beta(const Matrix& X, const Vector& r, const Vector& w, double tau);

// Exact derivative of l2e_loss with respect to tau:
//   1/(2 sqrt(pi)) - (1/n) sqrt(2/pi) sum_i w_i (1 - tau^2 r_i^2).
double grad_tau(const Vector& r, const Vector& w, double tau);

// Largest singular value of X via power iteration on X'X (tolerance 1e-10,
// at most 10000 iterations, deterministic start vector).
double spectral_norm(const Matrix& X);

// Lipschitz bound for the coefficient-block gradient:
//   L_beta = (tau^3/n) sqrt(2/pi) g(r*) sigma_x^2,
// with g(r) = (1 - tau^2 r) exp(-tau^2 r^2 / 2) and
// r* = -[sqrt(1 + 4 tau^2) - 1] / (2 tau^2). Clamped positive.
double lipschitz_beta(double sigma_x, double tau, int n);

// Conservative bound on |d^2 h / d tau^2| over [tau_min, tau_max]: dense
// grid evaluation of the analytic second derivative, doubled, floored at
// 1e-8.
double lipschitz_tau(const Vector& r, double tau_min, double tau_max);

// Analytic second derivative of the loss in tau; exposed for the bound's
// finer-grid cross-checks.
double loss_second_derivative_tau(const Vector& r, double tau);

LipschitzInfo lipschitz_info(const Matrix& X, const Vector& r, double tau,
                             double tau_min, double tau_max);

}  // namespace l2e
