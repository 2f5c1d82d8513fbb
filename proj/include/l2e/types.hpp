#pragma once

#include <Eigen/Core>

#include "l2e/errors.hpp"

namespace l2e {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Parameter pair being optimized: regression coefficients and the noise
// precision (reciprocal standard deviation).
struct Theta {
    Vector beta;
    double tau = 1.0;

    // Throws InvalidArgument unless tau is finite and positive and beta has
    // no non-finite entries.
    void validate() const;
};

// Quantities entering the step-size bounds for the two blocks.
//   sigma_x : largest singular value of the design matrix
//   l_beta  : Lipschitz bound for the coefficient-block gradient
//   l_tau   : Lipschitz bound for the precision-block derivative
struct LipschitzInfo {
    double sigma_x = 0.0;
    double l_beta = 0.0;
    double l_tau = 0.0;
};

}  // namespace l2e
