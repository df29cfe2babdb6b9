#include "idcr/flow.hpp"

#include <cmath>

#include "idcr/errors.hpp"

namespace idcr {

Tensor interpolate(const Tensor& z0, const Tensor& eps, double t) {
    require_same_shape(z0, eps, "interpolate");
    Tensor out(z0.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (1.0 - t) * z0.data[i] + t * eps.data[i];
    return out;
}

Tensor velocity_target(const Tensor& z0, const Tensor& eps) {
    require_same_shape(z0, eps, "velocity_target");
    Tensor out(z0.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = eps.data[i] - z0.data[i];
    return out;
}

double rf_loss(const Tensor& pred_v, const Tensor& z0, const Tensor& eps, double t,
               const std::function<double(double)>& w) {
    require_same_shape(pred_v, z0, "rf_loss");
    require_same_shape(z0, eps, "rf_loss");
    double acc = 0.0;
    for (size_t i = 0; i < pred_v.data.size(); ++i) {
        double r = pred_v.data[i] - (eps.data[i] - z0.data[i]);
        acc += r * r;
    }
    return w(t) * acc / static_cast<double>(pred_v.numel());
}

double sigma(double t, double a) {
    if (!(t > 0.0 && t < 1.0))
        throw domain_error("sigma: t=" + std::to_string(t) + " outside (0,1)");
    if (a < 0.0) throw domain_error("sigma: a must be nonnegative");
    return a * std::sqrt(t / (1.0 - t));
}

Tensor ode_euler_step(const Tensor& x, const Tensor& v, double dt) {
    require_same_shape(x, v, "ode_euler_step");
    Tensor out(x.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = x.data[i] + v.data[i] * dt;
    return out;
}

SdeStepResult sde_step(const Tensor& x, const Tensor& v, double t, double dt, double a,
                       const Tensor& noise) {
    require_same_shape(x, v, "sde_step");
    require_same_shape(x, noise, "sde_step");
    double s = sigma(t, a);
    double s2t = s * s / (2.0 * t);
    SdeStepResult r;
    r.mean = Tensor(x.shape);
    // mean = x + [v + (sigma^2/2t) * (x + (1-t) v)] * dt, dt signed
    for (size_t i = 0; i < x.data.size(); ++i) {
        double tmp = x.data[i] + (1.0 - t) * v.data[i];
        double drift = v.data[i] + s2t * tmp;
        r.mean.data[i] = x.data[i] + drift * dt;
    }
    r.std = s * std::sqrt(std::abs(dt));
    r.x_next = Tensor(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i)
        r.x_next.data[i] = r.mean.data[i] + r.std * noise.data[i];
    return r;
}

double transition_log_prob(const Tensor& x_next, const Tensor& mean, double stddev) {
    if (stddev <= 0.0) throw domain_error("transition_log_prob: std must be positive");
    require_same_shape(x_next, mean, "transition_log_prob");
    double d2 = 0.0;
    for (size_t i = 0; i < mean.data.size(); ++i) {
        double d = x_next.data[i] - mean.data[i];
        d2 += d * d;
    }
    double D = static_cast<double>(mean.numel());
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return -0.5 * D * std::log(kTwoPi * stddev * stddev) - d2 / (2.0 * stddev * stddev);
}

Tensor cfg_velocity(const Tensor& v_cond, const Tensor& v_uncond, double scale) {
    require_same_shape(v_cond, v_uncond, "cfg_velocity");
    Tensor out(v_cond.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = v_uncond.data[i] + scale * (v_cond.data[i] - v_uncond.data[i]);
    return out;
}

NoiseSchedule NoiseSchedule::make(double a, int num_steps) {
    if (num_steps < 1) throw domain_error("NoiseSchedule: num_steps must be >= 1");
    if (a < 0.0) throw domain_error("NoiseSchedule: a must be nonnegative");
    NoiseSchedule s;
    s.a = a;
    s.num_steps = num_steps;
    double delta = 1.0 / (2.0 * num_steps);
    double step = (1.0 - 2.0 * delta) / num_steps;
    s.t_grid.resize(static_cast<size_t>(num_steps) + 1);
    for (int k = 0; k <= num_steps; ++k) s.t_grid[static_cast<size_t>(k)] = (1.0 - delta) - k * step;
    return s;
}

Trajectory sample(const VelocityFn& v_cond, const VelocityFn& v_uncond,
                  const std::vector<int>& latent_shape, const SamplerConfig& config,
                  const DecodeFn& decode, uint64_t trajectory_index) {
    if (config.num_steps < 1) throw domain_error("sample: num_steps must be >= 1");
    if (config.cfg_scale < 0.0) throw domain_error("sample: cfg_scale must be >= 0");

    NoiseSchedule sched = NoiseSchedule::make(config.noise_a, config.num_steps);
    double dt = sched.t_grid[1] - sched.t_grid[0]; // negative

    Trajectory traj;
    traj.dt = dt;

    // initial state: pure noise
    Tensor x(latent_shape);
    {
        Rng rng = rng_stream(config.seed, trajectory_index, 0xffffffffULL);
        for (auto& v : x.data) v = rng.normal();
    }
    traj.states.push_back(x);

    for (int k = 0; k < config.num_steps; ++k) {
        double t = sched.t_grid[static_cast<size_t>(k)];
        Tensor vel = v_cond(x, t);
        if (config.cfg_scale != 1.0) {
            Tensor vu = v_uncond(x, t);
            vel = cfg_velocity(vel, vu, config.cfg_scale);
        }
        traj.t_at.push_back(t);
        if (config.mode == SampleMode::ODE) {
            x = ode_euler_step(x, vel, dt);
        } else {
            Tensor noise(x.shape);
            Rng rng = rng_stream(config.seed, trajectory_index, static_cast<uint64_t>(k));
            for (auto& n : noise.data) n = rng.normal();
            SdeStepResult r = sde_step(x, vel, t, dt, config.noise_a, noise);
            traj.step_means.push_back(r.mean);
            traj.step_std.push_back(r.std);
            // a = 0 degenerates to the deterministic sampler; no density exists
            if (r.std > 0.0)
                traj.log_probs.push_back(transition_log_prob(r.x_next, r.mean, r.std));
            x = std::move(r.x_next);
        }
        traj.states.push_back(x);
    }
    traj.video = decode ? decode(x) : x;
    return traj;
}

} // namespace idcr
