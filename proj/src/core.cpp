#include "l2e/core.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "l2e/rng.hpp"

namespace l2e {

namespace {


void require_finite(const Vector& v, const char* name) {
    if (!v.allFinite()) {
        throw InvalidArgument(std::string(name) + " contains non-finite entries");
    }
}

void require_finite(const Matrix& m, const char* name) {
    if (!m.allFinite()) {
        throw InvalidArgument(std::string(name) + " contains non-finite entries");
    }
}

void require_positive_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw InvalidArgument("precision must be finite and positive, got " +
                              std::to_string(tau));
    }
}

}  // namespace

void Theta::validate() const {
    require_positive_tau(tau);
    require_finite(beta, "beta");
}

Vector residuals(const Matrix& X, const Vector& y, const Vector& beta) {
    if (X.rows() != y.size()) {
        throw DimensionError("design has " + std::to_string(X.rows()) +
                             " rows but response has " + std::to_string(y.size()) +
                             " entries");
    }
    if (X.cols() != beta.size()) {
        throw DimensionError("design has " + std::to_string(X.cols()) +
                             " columns but beta has " + std::to_string(beta.size()) +
                             " entries");
    }
    require_finite(X, "X");
    require_finite(y, "y");
    require_finite(beta, "beta");
    return y - X * beta;
}

Vector weights(const Vector& r, double tau) {
    require_positive_tau(tau);
    require_finite(r, "residuals");
    const double floor = std::numeric_limits<double>::min();
    Vector w(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double z = tau * r[i];
        w[i] = std::max(std::exp(-0.5 * z * z), floor);
    }
    return w;
}

double l2e_loss(const Vector& r, double tau) {
    require_positive_tau(tau);
    if (r.size() == 0) {
        throw InvalidArgument("residual vector is empty");
    }
    require_finite(r, "residuals");
    const double n = static_cast<double>(r.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double z = tau * r[i];
        acc += std::exp(-0.5 * z * z);
    }
    return tau * kHalfInvSqrtPi - (tau / n) * kSqrt2OverPi * acc;
}

Vector grad_beta(const Matrix& X, const Vector& r, const Vector& w, double tau) {
    require_positive_tau(tau);
    if (X.rows() != r.size() || r.size() != w.size()) {
        throw DimensionError("design rows (" + std::to_string(X.rows()) +
                             "), residuals (" + std::to_string(r.size()) +
                             ") and weights (" + std::to_string(w.size()) +
                             ") disagree");
    }
    require_finite(X, "X");
    require_finite(r, "residuals");
    require_finite(w, "weights");
    const double n = static_cast<double>(r.size());
    const double scale = -(tau * tau * tau / n) * kSqrt2OverPi;
    return scale * (X.transpose() * w.cwiseProduct(r));
}

double grad_tau(const Vector& r, const Vector& w, double tau) {
    require_positive_tau(tau);
    if (r.size() != w.size()) {
        throw DimensionError("residuals (" + std::to_string(r.size()) +
                             ") and weights (" + std::to_string(w.size()) +
                             ") disagree");
    }
    require_finite(r, "residuals");
    require_finite(w, "weights");
    const double n = static_cast<double>(r.size());
    const double tau2 = tau * tau;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        acc += w[i] * (1.0 - tau2 * r[i] * r[i]);
    }
    return kHalfInvSqrtPi - kSqrt2OverPi * acc / n;
}

double spectral_norm(const Matrix& X) {
    if (X.size() == 0) {
        throw InvalidArgument("design matrix is empty");
    }
    require_finite(X, "X");

    // Power iteration on the Gram matrix, applied as X'(Xv) to avoid
    // forming it. Fixed-seed start so repeated fits are bit-identical.
    const Eigen::Index p = X.cols();
    Rng rng(0x5eed5eedULL);
    Vector v(p);
    for (Eigen::Index j = 0; j < p; ++j) v[j] = rng.normal();
    double vnorm = v.norm();
    if (vnorm == 0.0) {  // unreachable in practice
        v.setOnes();
        vnorm = v.norm();
    }
    v /= vnorm;

    double lambda = 0.0;
    for (int iter = 0; iter < 10000; ++iter) {
        Vector u = X.transpose() * (X * v);
        const double unorm = u.norm();
        if (unorm == 0.0) return 0.0;  // X'X v vanished: X has rank issues on v
        const double lambda_new = v.dot(u);
        v = u / unorm;
        if (std::abs(lambda_new - lambda) <= 1e-10 * std::max(1.0, std::abs(lambda_new))) {
            lambda = lambda_new;
            break;
        }
        lambda = lambda_new;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

double lipschitz_beta(double sigma_x, double tau, int n) {
    require_positive_tau(tau);
    if (n <= 0) {
        throw InvalidArgument("n must be positive");
    }
    if (!(sigma_x >= 0.0) || !std::isfinite(sigma_x)) {
        throw InvalidArgument("sigma_x must be finite and nonnegative");
    }
    const double tau2 = tau * tau;
    const double r_star = -(std::sqrt(1.0 + 4.0 * tau2) - 1.0) / (2.0 * tau2);
    const double g = (1.0 - tau2 * r_star) * std::exp(-0.5 * tau2 * r_star * r_star);
    // g(r*) is positive for every tau; the absolute value is a guard only.
    return (tau * tau2 / n) * kSqrt2OverPi * std::abs(g) * sigma_x * sigma_x;
}

double loss_second_derivative_tau(const Vector& r, double tau) {
    const double n = static_cast<double>(r.size());
    const double tau2 = tau * tau;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double r2 = r[i] * r[i];
        acc += tau * r2 * std::exp(-0.5 * tau2 * r2) * (3.0 - tau2 * r2);
    }
    return kSqrt2OverPi * acc / n;
}

double lipschitz_tau(const Vector& r, double tau_min, double tau_max) {
    if (r.size() == 0) {
        throw InvalidArgument("residual vector is empty");
    }
    if (!(tau_min < tau_max)) {
        throw InvalidArgument("degenerate precision interval [" +
                              std::to_string(tau_min) + ", " +
                              std::to_string(tau_max) + "]");
    }
    require_finite(r, "residuals");

    constexpr int kGridPoints = 256;
    double worst = 0.0;
    for (int k = 0; k < kGridPoints; ++k) {
        const double t = tau_min + (tau_max - tau_min) * k / (kGridPoints - 1.0);
        worst = std::max(worst, std::abs(loss_second_derivative_tau(r, t)));
    }
    return std::max(2.0 * worst, 1e-8);
}

LipschitzInfo lipschitz_info(const Matrix& X, const Vector& r, double tau,
                             double tau_min, double tau_max) {
    LipschitzInfo info;
    info.sigma_x = spectral_norm(X);
    info.l_beta = lipschitz_beta(info.sigma_x, tau, static_cast<int>(r.size()));
    info.l_tau = lipschitz_tau(r, tau_min, tau_max);
    return info;
}

}  // namespace l2e
