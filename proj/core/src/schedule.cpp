#include "faac/schedule.hpp"

#include <cmath>

namespace faac {

void NoiseSchedule::validate() const {
    FAAC_CHECK_INVARIANT(num_steps >= 1, "schedule: empty");
    FAAC_CHECK_INVARIANT(betas.size() == size_t(num_steps), "schedule: betas size");
    FAAC_CHECK_INVARIANT(alpha_bars.size() == size_t(num_steps) + 1, "schedule: alpha_bars size");
    FAAC_CHECK_INVARIANT(alpha_bars[0] == 1.0, "schedule: alpha_bars[0] != 1");
    FAAC_CHECK_INVARIANT(alpha_bars[size_t(num_steps)] > 0.0, "schedule: alpha_bars[T] <= 0");
    for (int t = 1; t <= num_steps; ++t) {
        FAAC_CHECK_INVARIANT(alpha_bars[size_t(t)] < alpha_bars[size_t(t) - 1],
                             "schedule: alpha_bars not strictly decreasing");
        double expect = alpha_bars[size_t(t) - 1] * (1.0 - betas[size_t(t) - 1]);
        FAAC_CHECK_INVARIANT(std::abs(alpha_bars[size_t(t)] - expect) <= 1e-12 * expect + 1e-300,
                             "schedule: cumulative product identity broken");
    }
}

NoiseSchedule build_schedule(int num_steps, double beta_start, double beta_end) {
    FAAC_REQUIRE(num_steps >= 1, "build_schedule: T must be >= 1");
    FAAC_REQUIRE(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
                 "build_schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.num_steps = num_steps;
    s.betas.resize(size_t(num_steps));
    s.alpha_bars.resize(size_t(num_steps) + 1);
    s.alpha_bars[0] = 1.0;
    for (int t = 0; t < num_steps; ++t) {
        double frac = num_steps == 1 ? 0.0 : double(t) / double(num_steps - 1);
        s.betas[size_t(t)] = beta_start + (beta_end - beta_start) * frac;
        s.alpha_bars[size_t(t) + 1] = s.alpha_bars[size_t(t)] * (1.0 - s.betas[size_t(t)]);
    }
    s.validate();
    return s;
}

std::vector<int> uniform_time_grid(int t_max, int steps) {
    FAAC_REQUIRE(t_max >= 1, "uniform_time_grid: t_max must be >= 1");
    FAAC_REQUIRE(steps >= 1, "uniform_time_grid: steps must be >= 1");
    std::vector<int> grid;
    grid.push_back(0);
    for (int j = 1; j <= steps; ++j) {
        int t = int(std::lround(double(j) * double(t_max) / double(steps)));
        if (t > grid.back()) grid.push_back(t);
    }
    return grid;
}

}  // namespace faac
