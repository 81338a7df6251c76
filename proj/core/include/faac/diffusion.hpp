#pragma once

#include <functional>
#include <utility>

#include "faac/grid.hpp"
#include "faac/prompt.hpp"
#include "faac/schedule.hpp"

namespace faac {

// A single frame's pixel latent together with its noise level.
struct FrameLatent {
    Grid data;
    int t = 0;
};

enum class NoiseOrigin { gaussian, ddim_inverted };

struct NoiseSample {
    Grid data;
    NoiseOrigin origin = NoiseOrigin::gaussian;
};

// Frame-wise noise predictor with the prompt threaded through; the network
// behind it stays out of this module.
using DenoiserHandle =
    std::function<Grid(const FrameLatent& x_t, int t, const PromptAttributes& prompt)>;

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
FrameLatent forward_diffuse(const FrameLatent& x0, int t, const NoiseSample& eps,
                            const NoiseSchedule& s);

// x0_hat = (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t), t taken from x_t
FrameLatent predict_x0(const FrameLatent& x_t, const NoiseSample& eps_hat,
                       const NoiseSchedule& s);

// One ancestral step with the posterior mean from eps_hat and the fixed
// schedule posterior variance. z is the injected standard normal; its
// coefficient vanishes at t = 1 because abar_0 = 1.
FrameLatent ddpm_step(const FrameLatent& x_t, const NoiseSample& eps_hat, int t,
                      const NoiseSchedule& s, const NoiseSample& z);

// Deterministic (eta = 0) update from t down to t_prev.
FrameLatent ddim_step(const FrameLatent& x_t, const NoiseSample& eps_hat, int t, int t_prev,
                      const NoiseSchedule& s);

// Integrates the probability-flow ODE forward from t = 0 to target_t over a
// uniform sub-grid of `steps` timesteps, evaluating the denoiser at each
// interval's arrival time. Returns the noised latent and the equivalent
// noise eps_eq = (x_t - sqrt(abar) x0) / sqrt(1 - abar), which reconstructs
// x0 through predict_x0 exactly by construction.
std::pair<FrameLatent, NoiseSample> ddim_invert(const FrameLatent& x0, int target_t, int steps,
                                                const DenoiserHandle& denoiser,
                                                const PromptAttributes& prompt,
                                                const NoiseSchedule& s);

}  // namespace faac
