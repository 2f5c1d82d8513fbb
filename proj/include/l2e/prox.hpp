#pragma once

#include <optional>

#include "l2e/types.hpp"

namespace l2e {

// Structural term J(beta) attached to the loss. Indicator kinds encode hard
// constraints; l1_penalty is the soft-thresholded penalty lambda * |beta|_1.
struct ConstraintSpec {
    enum class Kind {
        none,
        l1_penalty,
        l1_ball,
        isotonic,
        convex_shape,
    };

    Kind kind = Kind::none;
    double lambda = 0.0;  // l1_penalty
    double radius = 0.0;  // l1_ball
    // Strictly increasing site locations for shape constraints. When absent,
    // uniformly spaced sites are assumed.
    std::optional<Vector> sites;

    static ConstraintSpec none() { return {}; }
    static ConstraintSpec l1_penalty(double lambda);
    static ConstraintSpec l1_ball(double radius);
    static ConstraintSpec isotonic();
    static ConstraintSpec convex_shape();
    static ConstraintSpec convex_shape(Vector sites);

    bool is_shape_constraint() const {
        return kind == Kind::isotonic || kind == Kind::convex_shape;
    }
    bool is_indicator() const {
        return kind == Kind::l1_ball || is_shape_constraint();
    }

    // Throws InvalidArgument on negative lambda/radius or non-increasing
    // sites.
    void validate() const;
};

// prox_{step J}(v): argmin_u 1/2 |u - v|^2 + step J(u). For indicator kinds
// the step is irrelevant and this is the Euclidean projection.
Vector prox(const ConstraintSpec& spec, const Vector& v, double step);

// Element-wise sign(v_i) max(|v_i| - threshold, 0).
Vector soft_threshold(const Vector& v, double threshold);

// Euclidean projection onto {u : |u|_1 <= radius}, exact sort-based
// simplex-threshold algorithm.
Vector project_l1_ball(const Vector& v, double radius);

// Euclidean projection onto the nondecreasing cone, exact pool-adjacent-
// violators with unit weights.
Vector project_isotonic(const Vector& v);

// Euclidean projection onto {u : second differences of u at the sites are
// nonnegative}, via Dykstra's cyclic projections onto the n-2 half-spaces.
// For n < 3 the cone is all of space and v is returned unchanged.
Vector project_convex_cone(const Vector& v);
Vector project_convex_cone(const Vector& v, const Vector& sites);

// clamp(tau, tau_min, tau_max).
double project_box(double tau, double tau_min, double tau_max);

// Discrete curvature d_i = v(t_{i+1}) - 2 v(t_i) + v(t_{i-1}) on uniform
// sites; divided-difference generalization otherwise, normalized so the
// uniform case reduces to plain second differences. Affine sequences map to
// zero. Result has length n-2 (empty for n < 3).
Vector second_differences(const Vector& v);
Vector second_differences(const Vector& v, const Vector& sites);

}  // namespace l2e
