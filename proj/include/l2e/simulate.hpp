#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "l2e/dataset.hpp"
#include "l2e/types.hpp"

namespace l2e {

// Recipe for synthetic data with optional gross-error contamination.
//
// Generators:
//   identity_design_cubic   y_i = t_i^3 + noise, identity design, sites
//                           uniformly spaced on [-1, 1], noise SD 0.1
//   identity_design_quartic y_i = t_i^4 + noise, same design and noise
//   linear_gaussian         X iid standard normal, y = X beta_star + noise,
//                           noise SD 1/tau_star
//
// Response-side outliers shift selected y_i by +/- magnitude * noise SD with
// random sign; design-side outliers (linear generator only) multiply the
// selected rows of X by magnitude after y is generated, producing leverage
// points.
struct SimulationSpec {
    enum class Generator {
        identity_design_cubic,
        identity_design_quartic,
        linear_gaussian,
    };
    enum class OutlierSide { response, design, both };

    Generator generator = Generator::linear_gaussian;
    int n = 100;
    int n_outliers = 0;
    double outlier_magnitude = 10.0;  // in multiples of the noise SD
    OutlierSide outlier_side = OutlierSide::response;
    std::uint64_t seed = 0;

    // linear_gaussian only
    int p = 1;
    Vector beta_star;       // defaults to all ones when empty
    double tau_star = 1.0;  // noise precision

    void validate() const;
};

struct GroundTruth {
    // Noise-free responses at the sites (identity designs) or X beta_star
    // (linear generator).
    Vector f_values;
    std::optional<Vector> beta_star;     // linear generator
    std::optional<Vector> sites;         // identity designs
    std::vector<std::size_t> outlier_indices;  // sorted, 0-based
    double noise_sd = 0.0;
};

struct Simulation {
    Dataset data;
    GroundTruth truth;
};

// Deterministic given spec.seed; identical specs produce identical bits.
Simulation simulate(const SimulationSpec& spec);

}  // namespace l2e
