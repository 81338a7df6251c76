#pragma once

#include <vector>

#include "faac/common.hpp"

namespace faac {

// Variance schedule of the diffusion process. Indexing convention:
// t in {0..T}, alpha_bars[0] = 1, so t = 0 is the clean image and
// alpha_bars[t] = prod_{s<t} (1 - betas[s]).
struct NoiseSchedule {
    int num_steps = 0;                // T
    std::vector<double> betas;        // size T
    std::vector<double> alpha_bars;   // size T + 1

    double alpha_bar(int t) const {
        FAAC_REQUIRE(t >= 0 && t <= num_steps, "schedule: t out of range");
        return alpha_bars[size_t(t)];
    }
    double beta(int t) const {
        FAAC_REQUIRE(t >= 1 && t <= num_steps, "schedule: beta index out of range");
        return betas[size_t(t - 1)];
    }

    // Checks monotonicity and the cumulative-product identity.
    void validate() const;
};

// Linear beta ramp from beta_start to beta_end over T steps.
NoiseSchedule build_schedule(int num_steps, double beta_start, double beta_end);

// Uniformly spaced sampling grid 0 = tau_0 < ... < tau_n = t_max with at most
// `steps` intervals (fewer when rounding collapses neighbors).
std::vector<int> uniform_time_grid(int t_max, int steps);

}  // namespace faac
