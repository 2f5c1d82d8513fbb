#pragma once

#include <vector>

#include "l2e/prox.hpp"

namespace l2e::detail {

// Exact Euclidean projection onto the discrete convex cone {u : Du >= 0},
// computed by the Lawson-Hanson active-set method on the dual: minimize
// 1/2 mu' (DD') mu + (Dv)' mu over mu >= 0, then x = v + D' mu. The Gram
// matrix is pentadiagonal, so each working-set solve is a banded Cholesky.
// The bounded-sweep cyclic iteration behind project_convex_cone stalls well
// short of this accuracy on large inputs, so the solver projects through
// this routine instead.
//
// `warm`, when non-null, supplies the starting multipliers and receives the
// final ones; the dual is strictly convex, so any nonnegative start reaches
// the same (exact) projection and a previous call's multipliers merely
// shorten the active-set walk. A stale or empty state resets to zero.
Vector project_cone_exact(const Vector& v, const Vector* sites,
                          std::vector<double>* warm);

// prox() with a warm state for the convex-shape branch; every other kind
// ignores it and matches prox() exactly.
Vector prox_warm(const ConstraintSpec& spec, const Vector& v, double step,
                 std::vector<double>* cone_warm);

}  // namespace l2e::detail
