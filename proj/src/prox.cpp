#include "l2e/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "prox_internal.hpp"

namespace l2e {

namespace {

void require_finite(const Vector& v, const char* name) {
    if (!v.allFinite()) {
        throw InvalidArgument(std::string(name) + " contains non-finite entries");
    }
}

void require_increasing_sites(const Vector& sites) {
    for (Eigen::Index i = 1; i < sites.size(); ++i) {
        if (!(sites[i] > sites[i - 1])) {
            throw InvalidArgument("sites must be strictly increasing (violated at index " +
                                  std::to_string(i) + ")");
        }
    }
}

// Three-point half-space normal per interior site, scaled so uniform
// spacing gives (1, -2, 1).
struct CurvatureRow {
    double left, center, right;
};

std::vector<CurvatureRow> curvature_rows(Eigen::Index n, const Vector* sites) {
    std::vector<CurvatureRow> rows;
    if (n < 3) return rows;
    rows.reserve(static_cast<std::size_t>(n - 2));
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        if (sites == nullptr) {
            rows.push_back({1.0, -2.0, 1.0});
        } else {
            const double h_left = (*sites)[i] - (*sites)[i - 1];
            const double h_right = (*sites)[i + 1] - (*sites)[i];
            const double s = 0.5 * (h_left + h_right);
            rows.push_back({h_right / s, -(h_left + h_right) / s, h_left / s});
        }
    }
    return rows;
}

Vector apply_curvature(const Vector& v, const std::vector<CurvatureRow>& rows) {
    Vector d(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const Eigen::Index i = static_cast<Eigen::Index>(k) + 1;
        d[static_cast<Eigen::Index>(k)] =
            rows[k].left * v[i - 1] + rows[k].center * v[i] + rows[k].right * v[i + 1];
    }
    return d;
}

Vector dykstra_cone(const Vector& v, const Vector* sites) {
    const Eigen::Index n = v.size();
    if (n < 3) return v;

    const std::vector<CurvatureRow> rows = curvature_rows(n, sites);
    const std::size_t m = rows.size();

    // Feasible inputs are fixed points; skip the iteration entirely.
    {
        const Vector d = apply_curvature(v, rows);
        if ((d.array() >= 0.0).all()) return v;
    }

    std::vector<double> norm2(m);
    for (std::size_t k = 0; k < m; ++k) {
        norm2[k] = rows[k].left * rows[k].left + rows[k].center * rows[k].center +
                   rows[k].right * rows[k].right;
    }

    Vector x = v;
    // Dykstra corrections, one 3-vector per half-space stored as its
    // multiplier along the normal.
    std::vector<double> corr(m, 0.0);

    constexpr int kMaxSweeps = 10000;
    constexpr double kObjTol = 1e-10;
    constexpr double kFeasTol = 1e-8;

    double prev_obj = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        for (std::size_t k = 0; k < m; ++k) {
            const Eigen::Index i = static_cast<Eigen::Index>(k) + 1;
            // y = x + correction along this normal
            const double y_l = x[i - 1] + corr[k] * rows[k].left;
            const double y_c = x[i] + corr[k] * rows[k].center;
            const double y_r = x[i + 1] + corr[k] * rows[k].right;
            const double dot = rows[k].left * y_l + rows[k].center * y_c + rows[k].right * y_r;
            if (dot >= 0.0) {
                x[i - 1] = y_l;
                x[i] = y_c;
                x[i + 1] = y_r;
                corr[k] = 0.0;
            } else {
                const double step = dot / norm2[k];
                x[i - 1] = y_l - step * rows[k].left;
                x[i] = y_c - step * rows[k].center;
                x[i + 1] = y_r - step * rows[k].right;
                corr[k] = step;
            }
        }
        const double obj = 0.5 * (x - v).squaredNorm();
        if (std::abs(obj - prev_obj) < kObjTol) {
            const Vector d = apply_curvature(x, rows);
            if (d.minCoeff() >= -kFeasTol) break;
        }
        prev_obj = obj;
    }
    return x;
}

// Gram matrix Q = A A' of the curvature rows in symmetric pentadiagonal
// storage: d0 diagonal, d1 first superdiagonal, d2 second superdiagonal.
// Row k overlaps rows k-2..k+2 only, and the rows are linearly independent,
// so Q is positive definite.
struct PentaGram {
    std::vector<double> d0, d1, d2;
};

PentaGram gram_matrix(const std::vector<CurvatureRow>& rows) {
    const std::size_t m = rows.size();
    PentaGram q;
    q.d0.assign(m, 0.0);
    q.d1.assign(m > 1 ? m - 1 : 0, 0.0);
    q.d2.assign(m > 2 ? m - 2 : 0, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        q.d0[k] = rows[k].left * rows[k].left + rows[k].center * rows[k].center +
                  rows[k].right * rows[k].right;
        if (k + 1 < m)
            q.d1[k] = rows[k].center * rows[k + 1].left +
                      rows[k].right * rows[k + 1].center;
        if (k + 2 < m) q.d2[k] = rows[k].right * rows[k + 2].left;
    }
    return q;
}

std::vector<double> gram_times(const PentaGram& q, const std::vector<double>& mu) {
    const std::size_t m = mu.size();
    std::vector<double> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        double s = q.d0[k] * mu[k];
        if (k >= 1) s += q.d1[k - 1] * mu[k - 1];
        if (k >= 2) s += q.d2[k - 2] * mu[k - 2];
        if (k + 1 < m) s += q.d1[k] * mu[k + 1];
        if (k + 2 < m) s += q.d2[k] * mu[k + 2];
        out[k] = s;
    }
    return out;
}

// Solve Q_FF z = rhs for a sorted index subset F by banded Cholesky. The
// subset keeps bandwidth <= 2: compressed entries i, j only couple when the
// original indices differ by at most 2, which forces |i - j| <= 2.
std::vector<double> solve_on_subset(const PentaGram& q,
                                    const std::vector<std::size_t>& f,
                                    const std::vector<double>& rhs) {
    const std::size_t fs = f.size();
    std::vector<double> b0(fs), b1(fs > 1 ? fs - 1 : 0), b2(fs > 2 ? fs - 2 : 0);
    for (std::size_t i = 0; i < fs; ++i) {
        b0[i] = q.d0[f[i]];
        if (i + 1 < fs) {
            const std::size_t gap = f[i + 1] - f[i];
            b1[i] = gap == 1 ? q.d1[f[i]] : (gap == 2 ? q.d2[f[i]] : 0.0);
        }
        if (i + 2 < fs) b2[i] = f[i + 2] - f[i] == 2 ? q.d2[f[i]] : 0.0;
    }
    // Cholesky B = L L' with L stored as diag dl, subdiagonals l1, l2.
    std::vector<double> dl(fs), l1(fs, 0.0), l2(fs, 0.0);
    for (std::size_t i = 0; i < fs; ++i) {
        if (i >= 2) l2[i] = b2[i - 2] / dl[i - 2];
        if (i >= 1) {
            double off = b1[i - 1];
            if (i >= 2) off -= l2[i] * l1[i - 1];
            l1[i] = off / dl[i - 1];
        }
        double diag = b0[i] - l1[i] * l1[i] - l2[i] * l2[i];
        if (!(diag > 0.0))
            throw NumericalError(
                "cone projection working set lost positive definiteness",
                static_cast<int>(i));
        dl[i] = std::sqrt(diag);
    }
    std::vector<double> z(fs);
    for (std::size_t i = 0; i < fs; ++i) {
        double s = rhs[i];
        if (i >= 1) s -= l1[i] * z[i - 1];
        if (i >= 2) s -= l2[i] * z[i - 2];
        z[i] = s / dl[i];
    }
    for (std::size_t i = fs; i-- > 0;) {
        double s = z[i];
        if (i + 1 < fs) s -= l1[i + 1] * z[i + 1];
        if (i + 2 < fs) s -= l2[i + 2] * z[i + 2];
        z[i] = s / dl[i];
    }
    return z;
}

}  // namespace

namespace detail {

Vector project_cone_exact(const Vector& v, const Vector* sites,
                          std::vector<double>* warm) {
    const Eigen::Index n = v.size();
    if (n < 3) return v;

    const std::vector<CurvatureRow> rows = curvature_rows(n, sites);
    const std::size_t m = rows.size();
    const Vector av = apply_curvature(v, rows);
    if (av.minCoeff() >= 0.0) {
        if (warm != nullptr) warm->assign(m, 0.0);
        return v;
    }

    // Dual of the projection: minimize 1/2 mu' Q mu + (A v)' mu over mu >= 0
    // with Q = A A', then x = v + A' mu. Solved by the Lawson-Hanson active
    // set method; Q is positive definite, so the iteration terminates at the
    // unique multiplier vector from any nonnegative start, which makes a
    // previous call's multipliers a legitimate warm start.
    const PentaGram q = gram_matrix(rows);
    std::vector<double> local;
    std::vector<double>& mu = warm != nullptr ? *warm : local;
    if (mu.size() != m) mu.assign(m, 0.0);
    for (double& u : mu) u = std::max(u, 0.0);

    std::vector<char> in_set(m, 0);
    for (std::size_t k = 0; k < m; ++k) in_set[k] = mu[k] > 0.0 ? 1 : 0;

    const double kkt_tol = 1e-10 * std::max(1.0, av.lpNorm<Eigen::Infinity>());
    const std::size_t max_pivots = 30 * m + 1000;
    std::size_t pivots = 0;

    std::vector<std::size_t> f;
    std::vector<double> rhs;
    f.reserve(m);
    rhs.reserve(m);
    for (;;) {
        // Equality-restricted solves, stepping mu back toward feasibility
        // until the working-set solution is componentwise positive.
        for (;;) {
            if (++pivots > max_pivots)
                throw NumericalError("cone projection active set failed to "
                                     "settle",
                                     static_cast<int>(pivots));
            f.clear();
            rhs.clear();
            for (std::size_t k = 0; k < m; ++k) {
                if (in_set[k]) {
                    f.push_back(k);
                    rhs.push_back(-av[static_cast<Eigen::Index>(k)]);
                }
            }
            if (f.empty()) {
                std::fill(mu.begin(), mu.end(), 0.0);
                break;
            }
            const std::vector<double> z = solve_on_subset(q, f, rhs);
            bool interior = true;
            for (double zi : z)
                if (!(zi > 0.0)) {
                    interior = false;
                    break;
                }
            if (interior) {
                std::fill(mu.begin(), mu.end(), 0.0);
                for (std::size_t i = 0; i < f.size(); ++i) mu[f[i]] = z[i];
                break;
            }
            double alpha = 1.0;
            std::size_t block = f.size();
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (z[i] > 0.0) continue;
                const double a = mu[f[i]] / (mu[f[i]] - z[i]);
                if (a < alpha) {
                    alpha = a;
                    block = i;
                }
            }
            for (std::size_t i = 0; i < f.size(); ++i)
                mu[f[i]] += alpha * (z[i] - mu[f[i]]);
            // The blocking coordinate sits exactly on its bound; sweep it and
            // any rounding stragglers out of the working set.
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (z[i] <= 0.0 && (i == block || mu[f[i]] <= 0.0)) {
                    mu[f[i]] = 0.0;
                    in_set[f[i]] = 0;
                }
            }
        }
        // Most negative dual gradient on the bound set enters, if any.
        const std::vector<double> g = gram_times(q, mu);
        double worst = -kkt_tol;
        std::size_t enter = m;
        for (std::size_t k = 0; k < m; ++k) {
            if (in_set[k]) continue;
            const double gk = g[k] + av[static_cast<Eigen::Index>(k)];
            if (gk < worst) {
                worst = gk;
                enter = k;
            }
        }
        if (enter == m) break;
        in_set[enter] = 1;
    }

    Vector x = v;
    for (std::size_t k = 0; k < m; ++k) {
        if (mu[k] == 0.0) continue;
        const Eigen::Index i = static_cast<Eigen::Index>(k) + 1;
        x[i - 1] += mu[k] * rows[k].left;
        x[i] += mu[k] * rows[k].center;
        x[i + 1] += mu[k] * rows[k].right;
    }
    return x;
}

Vector prox_warm(const ConstraintSpec& spec, const Vector& v, double step,
                 std::vector<double>* cone_warm) {
    if (spec.kind == ConstraintSpec::Kind::convex_shape) {
        require_finite(v, "v");
        if (!(step > 0.0)) {
            throw InvalidArgument("prox step must be positive");
        }
        if (spec.sites && spec.sites->size() != v.size()) {
            throw DimensionError("sites (" + std::to_string(spec.sites->size()) +
                                 ") must match vector length (" +
                                 std::to_string(v.size()) + ")");
        }
        return project_cone_exact(v, spec.sites ? &*spec.sites : nullptr,
                                  cone_warm);
    }
    return prox(spec, v, step);
}

}  // namespace detail

ConstraintSpec ConstraintSpec::l1_penalty(double lambda) {
    ConstraintSpec s;
    s.kind = Kind::l1_penalty;
    s.lambda = lambda;
    s.validate();
    return s;
}

ConstraintSpec ConstraintSpec::l1_ball(double radius) {
    ConstraintSpec s;
    s.kind = Kind::l1_ball;
    s.radius = radius;
    s.validate();
    return s;
}

ConstraintSpec ConstraintSpec::isotonic() {
    ConstraintSpec s;
    s.kind = Kind::isotonic;
    return s;
}

ConstraintSpec ConstraintSpec::convex_shape() {
    ConstraintSpec s;
    s.kind = Kind::convex_shape;
    return s;
}

ConstraintSpec ConstraintSpec::convex_shape(Vector sites) {
    ConstraintSpec s;
    s.kind = Kind::convex_shape;
    s.sites = std::move(sites);
    s.validate();
    return s;
}

void ConstraintSpec::validate() const {
    if (kind == Kind::l1_penalty && !(lambda >= 0.0)) {
        throw InvalidArgument("penalty weight must be nonnegative");
    }
    if (kind == Kind::l1_ball && !(radius >= 0.0)) {
        throw InvalidArgument("ball radius must be nonnegative");
    }
    if (sites.has_value()) {
        require_increasing_sites(*sites);
    }
}

Vector prox(const ConstraintSpec& spec, const Vector& v, double step) {
    require_finite(v, "v");
    if (!(step > 0.0)) {
        throw InvalidArgument("prox step must be positive");
    }
    switch (spec.kind) {
        case ConstraintSpec::Kind::none:
            return v;
        case ConstraintSpec::Kind::l1_penalty:
            return soft_threshold(v, step * spec.lambda);
        case ConstraintSpec::Kind::l1_ball:
            return project_l1_ball(v, spec.radius);
        case ConstraintSpec::Kind::isotonic:
            return project_isotonic(v);
        case ConstraintSpec::Kind::convex_shape:
            return spec.sites ? project_convex_cone(v, *spec.sites)
                              : project_convex_cone(v);
    }
    throw ConstraintError("unsupported constraint kind");
}

Vector soft_threshold(const Vector& v, double threshold) {
    if (!(threshold >= 0.0)) {
        throw InvalidArgument("soft-threshold level must be nonnegative");
    }
    require_finite(v, "v");
    Vector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double mag = std::abs(v[i]) - threshold;
        out[i] = mag > 0.0 ? (v[i] > 0.0 ? mag : -mag) : 0.0;
    }
    return out;
}

Vector project_l1_ball(const Vector& v, double radius) {
    if (!(radius >= 0.0)) {
        throw InvalidArgument("ball radius must be nonnegative");
    }
    require_finite(v, "v");
    if (v.lpNorm<1>() <= radius) return v;
    if (radius == 0.0) return Vector::Zero(v.size());

    std::vector<double> mags(v.data(), v.data() + v.size());
    for (double& m : mags) m = std::abs(m);
    std::sort(mags.begin(), mags.end(), std::greater<double>());

    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < mags.size(); ++j) {
        cumulative += mags[j];
        const double candidate = (cumulative - radius) / static_cast<double>(j + 1);
        if (mags[j] - candidate > 0.0) {
            theta = candidate;
        } else {
            break;
        }
    }
    // At the feasibility boundary the sorted accumulation can round theta
    // to a tiny negative value; the exact answer there is no shrinkage.
    return soft_threshold(v, std::max(theta, 0.0));
}

Vector project_isotonic(const Vector& v) {
    if (v.size() == 0) {
        throw InvalidArgument("cannot project an empty vector");
    }
    require_finite(v, "v");

    const Eigen::Index n = v.size();
    // Stack of pooled blocks; adjacent violators merge left-to-right.
    std::vector<double> sums;
    std::vector<Eigen::Index> counts;
    sums.reserve(static_cast<std::size_t>(n));
    counts.reserve(static_cast<std::size_t>(n));

    for (Eigen::Index i = 0; i < n; ++i) {
        sums.push_back(v[i]);
        counts.push_back(1);
        while (sums.size() >= 2) {
            const std::size_t top = sums.size() - 1;
            if (sums[top - 1] * static_cast<double>(counts[top]) <=
                sums[top] * static_cast<double>(counts[top - 1])) {
                break;  // means nondecreasing, no violation
            }
            sums[top - 1] += sums[top];
            counts[top - 1] += counts[top];
            sums.pop_back();
            counts.pop_back();
        }
    }

    Vector out(n);
    Eigen::Index pos = 0;
    for (std::size_t b = 0; b < sums.size(); ++b) {
        const double mean = sums[b] / static_cast<double>(counts[b]);
        for (Eigen::Index k = 0; k < counts[b]; ++k) out[pos++] = mean;
    }
    return out;
}

Vector project_convex_cone(const Vector& v) {
    require_finite(v, "v");
    return dykstra_cone(v, nullptr);
}

Vector project_convex_cone(const Vector& v, const Vector& sites) {
    require_finite(v, "v");
    if (sites.size() != v.size()) {
        throw DimensionError("sites (" + std::to_string(sites.size()) +
                             ") and vector (" + std::to_string(v.size()) +
                             ") disagree");
    }
    require_increasing_sites(sites);
    return dykstra_cone(v, &sites);
}

double project_box(double tau, double tau_min, double tau_max) {
    if (!(tau_min < tau_max)) {
        throw InvalidArgument("inverted box bounds [" + std::to_string(tau_min) +
                              ", " + std::to_string(tau_max) + "]");
    }
    return std::min(std::max(tau, tau_min), tau_max);
}

Vector second_differences(const Vector& v) {
    const auto rows = curvature_rows(v.size(), nullptr);
    return apply_curvature(v, rows);
}

Vector second_differences(const Vector& v, const Vector& sites) {
    if (sites.size() != v.size()) {
        throw DimensionError("sites (" + std::to_string(sites.size()) +
                             ") and vector (" + std::to_string(v.size()) +
                             ") disagree");
    }
    require_increasing_sites(sites);
    const auto rows = curvature_rows(v.size(), &sites);
    return apply_curvature(v, rows);
}

}  // namespace l2e
