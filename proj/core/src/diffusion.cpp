#include "faac/diffusion.hpp"

#include <cmath>
#include <string>

namespace faac {

FrameLatent forward_diffuse(const FrameLatent& x0, int t, const NoiseSample& eps,
                            const NoiseSchedule& s) {
    FAAC_REQUIRE(t >= 0 && t <= s.num_steps, "forward_diffuse: t out of range");
    FAAC_REQUIRE(x0.t == 0, "forward_diffuse: input must be a clean latent (t = 0)");
    FAAC_REQUIRE(x0.data.same_shape(eps.data), "forward_diffuse: shape mismatch");

    const double ab = s.alpha_bar(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    FrameLatent out{Grid(x0.data.c, x0.data.h, x0.data.w), t};
    for (size_t i = 0; i < out.data.v.size(); ++i)
        out.data.v[i] = a * x0.data.v[i] + b * eps.data.v[i];
    return out;
}

FrameLatent predict_x0(const FrameLatent& x_t, const NoiseSample& eps_hat,
                       const NoiseSchedule& s) {
    FAAC_REQUIRE(x_t.t >= 1 && x_t.t <= s.num_steps,
                 "predict_x0: t must be in [1, T] (nothing to invert at t = 0)");
    FAAC_REQUIRE(x_t.data.same_shape(eps_hat.data), "predict_x0: shape mismatch");

    const double ab = s.alpha_bar(x_t.t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    FrameLatent out{Grid(x_t.data.c, x_t.data.h, x_t.data.w), 0};
    for (size_t i = 0; i < out.data.v.size(); ++i)
        out.data.v[i] = (x_t.data.v[i] - b * eps_hat.data.v[i]) / a;
    return out;
}

FrameLatent ddpm_step(const FrameLatent& x_t, const NoiseSample& eps_hat, int t,
                      const NoiseSchedule& s, const NoiseSample& z) {
    FAAC_REQUIRE(t >= 1 && t <= s.num_steps, "ddpm_step: t out of range");
    FAAC_REQUIRE(x_t.t == t, "ddpm_step: latent timestep disagrees with t");
    FAAC_REQUIRE(x_t.data.same_shape(eps_hat.data) && x_t.data.same_shape(z.data),
                 "ddpm_step: shape mismatch");

    const double beta = s.beta(t);
    const double alpha = 1.0 - beta;
    const double ab_t = s.alpha_bar(t);
    const double ab_prev = s.alpha_bar(t - 1);
    // posterior variance; zero at t = 1 since abar_0 = 1
    const double var = (1.0 - ab_prev) / (1.0 - ab_t) * beta;
    const double sigma = std::sqrt(var);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    const double noise_coef = beta / std::sqrt(1.0 - ab_t);

    FrameLatent out{Grid(x_t.data.c, x_t.data.h, x_t.data.w), t - 1};
    for (size_t i = 0; i < out.data.v.size(); ++i) {
        double mu = inv_sqrt_alpha * (x_t.data.v[i] - noise_coef * eps_hat.data.v[i]);
        out.data.v[i] = mu + sigma * z.data.v[i];
    }
    return out;
}

FrameLatent ddim_step(const FrameLatent& x_t, const NoiseSample& eps_hat, int t, int t_prev,
                      const NoiseSchedule& s) {
    FAAC_REQUIRE(t >= 1 && t <= s.num_steps, "ddim_step: t out of range");
    FAAC_REQUIRE(t_prev >= 0 && t_prev < t, "ddim_step: need 0 <= t_prev < t");
    FAAC_REQUIRE(x_t.t == t, "ddim_step: latent timestep disagrees with t");
    FAAC_REQUIRE(x_t.data.same_shape(eps_hat.data), "ddim_step: shape mismatch");

    const double ab_t = s.alpha_bar(t);
    const double ab_prev = s.alpha_bar(t_prev);
    const double a_t = std::sqrt(ab_t), b_t = std::sqrt(1.0 - ab_t);
    const double a_p = std::sqrt(ab_prev), b_p = std::sqrt(1.0 - ab_prev);

    FrameLatent out{Grid(x_t.data.c, x_t.data.h, x_t.data.w), t_prev};
    for (size_t i = 0; i < out.data.v.size(); ++i) {
        double x0_hat = (x_t.data.v[i] - b_t * eps_hat.data.v[i]) / a_t;
        out.data.v[i] = a_p * x0_hat + b_p * eps_hat.data.v[i];
    }
    return out;
}

std::pair<FrameLatent, NoiseSample> ddim_invert(const FrameLatent& x0, int target_t, int steps,
                                                const DenoiserHandle& denoiser,
                                                const PromptAttributes& prompt,
                                                const NoiseSchedule& s) {
    FAAC_REQUIRE(target_t >= 1 && target_t <= s.num_steps, "ddim_invert: target_t out of range");
    FAAC_REQUIRE(steps >= 1, "ddim_invert: steps must be >= 1");
    FAAC_REQUIRE(x0.t == 0, "ddim_invert: input must be a clean latent (t = 0)");

    const std::vector<int> grid = uniform_time_grid(target_t, steps);

    Grid x = x0.data;
    for (size_t j = 0; j + 1 < grid.size(); ++j) {
        const int t_src = grid[j];
        const int t_dst = grid[j + 1];
        Grid eps_hat = denoiser(FrameLatent{x, t_src}, t_dst, prompt);
        FAAC_REQUIRE(eps_hat.same_shape(x), "ddim_invert: denoiser output shape mismatch");
        if (!eps_hat.all_finite())
            throw NumericError("ddim_invert: denoiser produced non-finite values at t=" +
                               std::to_string(t_dst));

        const double ab_src = s.alpha_bar(t_src);
        const double ab_dst = s.alpha_bar(t_dst);
        const double a_s = std::sqrt(ab_src), b_s = std::sqrt(1.0 - ab_src);
        const double a_d = std::sqrt(ab_dst), b_d = std::sqrt(1.0 - ab_dst);
        for (size_t i = 0; i < x.v.size(); ++i) {
            double x0_hat = (x.v[i] - b_s * eps_hat.v[i]) / a_s;
            x.v[i] = a_d * x0_hat + b_d * eps_hat.v[i];
        }
        if (!x.all_finite())
            throw NumericError("ddim_invert: latent diverged at t=" + std::to_string(t_dst));
    }

    const double ab = s.alpha_bar(target_t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    NoiseSample eps_eq{Grid(x.c, x.h, x.w), NoiseOrigin::ddim_inverted};
    for (size_t i = 0; i < x.v.size(); ++i) eps_eq.data.v[i] = (x.v[i] - a * x0.data.v[i]) / b;

    return {FrameLatent{std::move(x), target_t}, std::move(eps_eq)};
}

}  // namespace faac
