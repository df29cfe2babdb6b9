#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "idcr/rng.hpp"
#include "idcr/tensor.hpp"

namespace idcr {

// Straight-line interpolation between data and noise, the induced constant
// velocity target, losses, deterministic Euler sampling, and the stochastic
// sampler whose per-step Gaussian transitions carry the policy likelihood.

Tensor interpolate(const Tensor& z0, const Tensor& eps, double t);
Tensor velocity_target(const Tensor& z0, const Tensor& eps);
double rf_loss(const Tensor& pred_v, const Tensor& z0, const Tensor& eps, double t,
               const std::function<double(double)>& w);

// sigma_t = a * sqrt(t / (1-t)); t must lie strictly inside (0, 1)
double sigma(double t, double a);

Tensor ode_euler_step(const Tensor& x, const Tensor& v, double dt);

struct SdeStepResult {
    Tensor x_next;
    Tensor mean;
    double std = 0.0;
};

// dt is signed along the integration direction; std uses |dt|.
SdeStepResult sde_step(const Tensor& x, const Tensor& v, double t, double dt, double a,
                       const Tensor& noise);

double transition_log_prob(const Tensor& x_next, const Tensor& mean, double stddev);

Tensor cfg_velocity(const Tensor& v_cond, const Tensor& v_uncond, double scale);

struct NoiseSchedule {
    double a = 1.0;
    int num_steps = 50;
    std::vector<double> t_grid; // strictly decreasing, clipped to [delta, 1-delta]

    // uniform grid with delta = 1/(2*num_steps); num_steps+1 points
    static NoiseSchedule make(double a, int num_steps);
};

enum class SampleMode { ODE, SDE };

struct SamplerConfig {
    int num_steps = 50;
    double cfg_scale = 2.5;
    SampleMode mode = SampleMode::ODE;
    uint64_t seed = 0;
    double noise_a = 1.0; // SDE noise level (paper's constant a)
};

struct Trajectory {
    std::vector<Tensor> states;     // num_steps + 1 entries
    std::vector<Tensor> step_means; // SDE only
    std::vector<double> step_std;   // SDE only: sigma_t * sqrt(|dt|)
    std::vector<double> log_probs;  // SDE only
    std::vector<double> t_at;       // t at which step k's velocity was evaluated
    double dt = 0.0;                // signed step (negative: t runs 1 -> 0)
    Tensor video;                   // decoded final state
};

// Velocity evaluations are injected as callables so the sampler has no model
// dependency; cond/uncond are combined with classifier-free guidance when
// scale != 1. decode maps the final latent to the stored video.
using VelocityFn = std::function<Tensor(const Tensor& x, double t)>;
using DecodeFn = std::function<Tensor(const Tensor& x)>;

Trajectory sample(const VelocityFn& v_cond, const VelocityFn& v_uncond,
                  const std::vector<int>& latent_shape, const SamplerConfig& config,
                  const DecodeFn& decode, uint64_t trajectory_index = 0);

} // namespace idcr
