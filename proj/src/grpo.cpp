#include "idcr/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "idcr/errors.hpp"
#include "idcr/paramref.hpp"

namespace idcr {

void TrainConfig::validate() const {
    if (group_size < 2)
        throw config_error("grpo: group_size must be >= 2 (group statistics undefined)");
    if (clip_eps <= 0.0) throw config_error("grpo: clip_eps must be positive");
    if (noise_a <= 0.0)
        throw config_error("grpo: noise_a must be positive (a = 0 leaves no exploration)");
    if (sample_steps < 1) throw config_error("grpo: sample_steps must be >= 1");
    if (batch_size < 1) throw config_error("grpo: batch_size must be >= 1");
}

void AdamW::step(const std::vector<std::pair<std::string, Tensor*>>& params,
                 const std::vector<Tensor>& grads) {
    if (params.size() != grads.size())
        throw contract_error("adamw: parameter/gradient count mismatch");
    if (m_.empty()) {
        for (const auto& [name, p] : params) {
            m_.emplace_back(p->shape);
            v_.emplace_back(p->shape);
        }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i].second;
        const Tensor& g = grads[i];
        require_same_shape(p, g, "adamw");
        for (size_t j = 0; j < p.data.size(); ++j) {
            double gj = g.data[j];
            m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * gj;
            v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * gj * gj;
            double mhat = m_[i].data[j] / bc1;
            double vhat = v_[i].data[j] / bc2;
            p.data[j] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * p.data[j]);
        }
    }
}

double grad_clip(std::vector<Tensor>& grads, double max_norm) {
    double sq = 0;
    for (const Tensor& g : grads)
        for (double v : g.data) sq += v * v;
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0) {
        double s = max_norm / norm;
        for (Tensor& g : grads)
            for (double& v : g.data) v *= s;
    }
    return norm;
}

std::vector<double> normalize_advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2)
        throw contract_error("normalize_advantages: need at least 2 rewards");
    double mean = 0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    double var = 0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rewards.size()); // population
    double denom = std::sqrt(var) + 1e-8;
    std::vector<double> out;
    for (double r : rewards) out.push_back((r - mean) / denom);
    return out;
}

double clipped_objective(double ratio, double advantage, double clip_eps) {
    if (clip_eps <= 0.0) throw domain_error("clipped_objective: clip_eps must be positive");
    double rc = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(ratio * advantage, rc * advantage);
}

double kl_penalty(const Tensor& new_mean, const Tensor& ref_mean, double stddev) {
    if (stddev <= 0.0) throw domain_error("kl_penalty: std must be positive");
    require_same_shape(new_mean, ref_mean, "kl_penalty");
    double d2 = 0;
    for (size_t i = 0; i < new_mean.data.size(); ++i) {
        double d = new_mean.data[i] - ref_mean.data[i];
        d2 += d * d;
    }
    return d2 / (2.0 * stddev * stddev);
}

GroupRollout rollout_group(const Model& policy, const SceneSample& scene,
                           const RewardWeights& w, const TrainConfig& cfg,
                           uint64_t outer_step, uint64_t condition_index) {
    cfg.validate();
    GroupRollout g;
    g.cond = scene_cond(scene);
    ContextTokens ctx = policy.encode(g.cond);
    ContextTokens nctx = policy.null_ctx();
    VelocityFn vc = [&](const Tensor& x, double t) { return policy.velocity(x, t, ctx); };
    VelocityFn vu = [&](const Tensor& x, double t) { return policy.velocity(x, t, nctx); };

    SamplerConfig sc;
    sc.num_steps = cfg.sample_steps;
    sc.cfg_scale = cfg.cfg_scale;
    sc.mode = SampleMode::SDE;
    sc.noise_a = cfg.noise_a;
    sc.seed = rng_stream(cfg.seed, outer_step, condition_index, 0x6f).next_u64();

    for (int i = 0; i < cfg.group_size; ++i) {
        Trajectory traj =
            sample(vc, vu, policy.cfg.video_shape(), sc,
                   [](const Tensor& x) { return decode_latent(x); }, static_cast<uint64_t>(i));
        RewardBreakdown b = score_video(traj.video, g.cond.refs, w);
        g.rewards.push_back(b.r_total);
        g.breakdowns.push_back(std::move(b));
        g.trajs.push_back(std::move(traj));
    }
    g.advantages = normalize_advantages(g.rewards);
    return g;
}

namespace {

// tape-side velocity with optional classifier-free guidance, mirroring the
// sampler's value path bit for bit
Var velocity_var(Tape& t, ParamRef& P, const Model& m, const Tensor& x, double time,
                 const ContextVars& ctx, const ContextVars& nctx, double cfg_scale) {
    Var vc = predict_velocity_t(t, P, m.cfg, m.params, x, time, ctx);
    if (cfg_scale == 1.0) return vc;
    Var vu = predict_velocity_t(t, P, m.cfg, m.params, x, time, nctx);
    return t.add_scaled(vu, 1.0, t.sub(vc, vu), cfg_scale);
}

// tape-side transition mean, same expression grouping as sde_step
Var mean_var(Tape& t, Var x, Var v, double time, double dt, double a) {
    double s = sigma(time, a);
    double s2t = s * s / (2.0 * time);
    Var tmp = t.add_scaled(x, 1.0, v, 1.0 - time);
    Var drift = t.add_scaled(v, 1.0, tmp, s2t);
    return t.add_scaled(x, 1.0, drift, dt);
}

Tensor ref_step_mean(const Model& ref, const Trajectory& traj, int k,
                     const ContextTokens& ctx, const ContextTokens& nctx, double cfg_scale,
                     double a) {
    const Tensor& x = traj.states[static_cast<size_t>(k)];
    Tensor v = ref.velocity(x, traj.t_at[static_cast<size_t>(k)], ctx);
    if (cfg_scale != 1.0)
        v = cfg_velocity(v, ref.velocity(x, traj.t_at[static_cast<size_t>(k)], nctx),
                         cfg_scale);
    Tensor zero(x.shape);
    return sde_step(x, v, traj.t_at[static_cast<size_t>(k)], traj.dt, a, zero).mean;
}

bool all_finite(const std::vector<Tensor>& grads) {
    for (const Tensor& g : grads)
        if (!g.all_finite()) return false;
    return true;
}

} // namespace

double step_ratio(const Model& policy, const Trajectory& traj, int step,
                  const ContextTokens& ctx, double cfg_scale, double noise_a) {
    if (traj.log_probs.empty())
        throw contract_error("step_ratio: trajectory carries no log-probs (ODE rollout?)");
    const Tensor& x = traj.states[static_cast<size_t>(step)];
    double time = traj.t_at[static_cast<size_t>(step)];
    Tensor v = policy.velocity(x, time, ctx);
    if (cfg_scale != 1.0)
        v = cfg_velocity(v, policy.velocity(x, time, policy.null_ctx()), cfg_scale);
    Tensor zero(x.shape);
    SdeStepResult r = sde_step(x, v, time, traj.dt, noise_a, zero);
    double lp = transition_log_prob(traj.states[static_cast<size_t>(step) + 1], r.mean,
                                    traj.step_std[static_cast<size_t>(step)]);
    return std::exp(lp - traj.log_probs[static_cast<size_t>(step)]);
}

StepMetrics grpo_update(Model& policy, const Model& ref,
                        const std::vector<GroupRollout>& groups, AdamW& opt,
                        const TrainConfig& cfg) {
    cfg.validate();
    StepMetrics mt;
    auto params = policy.param_list();
    std::vector<Tensor> grads;
    for (const auto& [name, p] : params) grads.emplace_back(p->shape);

    int n_terms = 0;
    int n_clipped = 0;
    double kl_sum = 0, ratio_sum = 0, reward_sum = 0, face_sum = 0, total_sum = 0;
    int n_rewards = 0;

    for (const GroupRollout& g : groups)
        for (size_t i = 0; i < g.breakdowns.size(); ++i) {
            reward_sum += g.rewards[i];
            face_sum += g.breakdowns[i].r_face;
            total_sum += g.breakdowns[i].r_total;
            ++n_rewards;
        }

    for (const GroupRollout& g : groups) {
        ContextTokens ref_ctx = ref.encode(g.cond);
        ContextTokens ref_nctx = ref.null_ctx();
        for (size_t i = 0; i < g.trajs.size(); ++i) {
            const Trajectory& traj = g.trajs[i];
            if (traj.log_probs.size() != traj.t_at.size())
                throw contract_error("grpo_update: trajectory lacks SDE log-probs");
            int steps = static_cast<int>(traj.t_at.size());
            double weight =
                1.0 / (static_cast<double>(groups.size()) * g.trajs.size() * steps);

            Tape t;
            ParamRef P(t);
            ContextVars ctx = encode_context_t(t, P, policy.cond_cfg, policy.params.cond,
                                               policy.vocab, g.cond);
            ContextVars nctx = null_context_t(t, P, policy.params.cond);
            Var obj;
            for (int k = 0; k < steps; ++k) {
                const Tensor& x = traj.states[static_cast<size_t>(k)];
                double time = traj.t_at[static_cast<size_t>(k)];
                Var v = velocity_var(t, P, policy, x, time, ctx, nctx, cfg.cfg_scale);
                Var xv = t.leaf(x);
                Var mean = mean_var(t, xv, v, time, traj.dt, cfg.noise_a);
                double sd = traj.step_std[static_cast<size_t>(k)];
                Var lp = t.gauss_logprob(mean, traj.states[static_cast<size_t>(k) + 1], sd);
                Var ratio =
                    t.vexp(t.add_scalar(lp, -traj.log_probs[static_cast<size_t>(k)]));
                Var surr = t.clipped_surrogate(ratio, g.advantages[i], cfg.clip_eps);
                Tensor rmean =
                    ref_step_mean(ref, traj, k, ref_ctx, ref_nctx, cfg.cfg_scale, cfg.noise_a);
                Var kl = t.scale(t.sumsq(t.sub(mean, t.leaf(std::move(rmean)))),
                                 1.0 / (2.0 * sd * sd));
                Var term = t.add_scaled(surr, 1.0, kl, -cfg.kl_coeff);
                obj = (k == 0) ? term : t.add(obj, term);

                double rv = t.val(ratio).data[0];
                ratio_sum += rv;
                if (rv < 1.0 - cfg.clip_eps || rv > 1.0 + cfg.clip_eps) ++n_clipped;
                kl_sum += t.val(kl).data[0];
                ++n_terms;
            }
            Var loss = t.scale(obj, -weight); // ascend the objective
            t.backward(loss);
            for (size_t pi = 0; pi < params.size(); ++pi) {
                Tensor gp = P.grad_of(*params[pi].second);
                for (size_t j = 0; j < gp.data.size(); ++j) grads[pi].data[j] += gp.data[j];
            }
        }
    }

    mt.mean_reward = n_rewards ? reward_sum / n_rewards : 0;
    mt.r_face_mean = n_rewards ? face_sum / n_rewards : 0;
    mt.r_total_mean = n_rewards ? total_sum / n_rewards : 0;
    mt.kl = n_terms ? kl_sum / n_terms : 0;
    mt.clip_frac = n_terms ? static_cast<double>(n_clipped) / n_terms : 0;
    mt.mean_ratio = n_terms ? ratio_sum / n_terms : 0;

    if (!all_finite(grads)) {
        mt.skipped = true; // leave parameters untouched
        return mt;
    }
    mt.grad_norm = grad_clip(grads, cfg.max_grad_norm);
    opt.step(params, grads);
    policy.train_step += 1;
    return mt;
}

std::vector<PreferencePair> build_preference_pairs(const std::vector<GroupRollout>& groups) {
    std::vector<PreferencePair> pairs;
    for (const GroupRollout& g : groups) {
        size_t best = 0, worst = 0;
        for (size_t i = 1; i < g.rewards.size(); ++i) {
            if (g.rewards[i] > g.rewards[best]) best = i;
            if (g.rewards[i] < g.rewards[worst]) worst = i;
        }
        if (g.rewards[best] == g.rewards[worst]) continue; // no preference signal
        pairs.push_back({g.cond, g.trajs[best], g.trajs[worst]});
    }
    return pairs;
}

namespace {

// tape-side total trajectory log-prob under the current parameters
Var traj_logprob_var(Tape& t, ParamRef& P, const Model& m, const Trajectory& traj,
                     const ContextVars& ctx, const ContextVars& nctx, double cfg_scale,
                     double a) {
    Var total;
    for (size_t k = 0; k < traj.t_at.size(); ++k) {
        const Tensor& x = traj.states[k];
        Var v = velocity_var(t, P, m, x, traj.t_at[k], ctx, nctx, cfg_scale);
        Var mean = mean_var(t, t.leaf(x), v, traj.t_at[k], traj.dt, a);
        Var lp = t.gauss_logprob(mean, traj.states[k + 1], traj.step_std[k]);
        total = (k == 0) ? lp : t.add(total, lp);
    }
    return total;
}

double traj_logprob_val(const Model& m, const Trajectory& traj, const ContextTokens& ctx,
                        const ContextTokens& nctx, double cfg_scale, double a) {
    double total = 0;
    for (size_t k = 0; k < traj.t_at.size(); ++k) {
        const Tensor& x = traj.states[k];
        Tensor v = m.velocity(x, traj.t_at[k], ctx);
        if (cfg_scale != 1.0)
            v = cfg_velocity(v, m.velocity(x, traj.t_at[k], nctx), cfg_scale);
        Tensor zero(x.shape);
        SdeStepResult r = sde_step(x, v, traj.t_at[k], traj.dt, a, zero);
        total += transition_log_prob(traj.states[k + 1], r.mean, traj.step_std[k]);
    }
    return total;
}

} // namespace

DpoMetrics dpo_baseline_update(Model& policy, const Model& ref,
                               const std::vector<PreferencePair>& pairs, AdamW& opt,
                               const TrainConfig& cfg) {
    DpoMetrics mt;
    if (pairs.empty()) {
        mt.skipped = true;
        return mt;
    }
    auto params = policy.param_list();
    std::vector<Tensor> grads;
    for (const auto& [name, p] : params) grads.emplace_back(p->shape);

    double loss_sum = 0, margin_sum = 0;
    for (const PreferencePair& pr : pairs) {
        ContextTokens rctx = ref.encode(pr.cond);
        ContextTokens rnctx = ref.null_ctx();
        double ref_margin =
            traj_logprob_val(ref, pr.winner, rctx, rnctx, cfg.cfg_scale, cfg.noise_a) -
            traj_logprob_val(ref, pr.loser, rctx, rnctx, cfg.cfg_scale, cfg.noise_a);

        Tape t;
        ParamRef P(t);
        ContextVars ctx = encode_context_t(t, P, policy.cond_cfg, policy.params.cond,
                                           policy.vocab, pr.cond);
        ContextVars nctx = null_context_t(t, P, policy.params.cond);
        Var lpw = traj_logprob_var(t, P, policy, pr.winner, ctx, nctx, cfg.cfg_scale,
                                   cfg.noise_a);
        Var lpl =
            traj_logprob_var(t, P, policy, pr.loser, ctx, nctx, cfg.cfg_scale, cfg.noise_a);
        Var margin = t.add_scalar(t.sub(lpw, lpl), -ref_margin);
        // -log sigmoid(eta * margin) == log(1 + exp(-eta * margin))
        Var loss = t.vlog(t.add_scalar(t.vexp(t.scale(margin, -cfg.dpo_eta)), 1.0));
        Var scaled = t.scale(loss, 1.0 / static_cast<double>(pairs.size()));
        t.backward(scaled);
        loss_sum += t.val(loss).data[0];
        margin_sum += t.val(margin).data[0];
        for (size_t pi = 0; pi < params.size(); ++pi) {
            Tensor gp = P.grad_of(*params[pi].second);
            for (size_t j = 0; j < gp.data.size(); ++j) grads[pi].data[j] += gp.data[j];
        }
    }
    mt.loss = loss_sum / static_cast<double>(pairs.size());
    mt.margin = margin_sum / static_cast<double>(pairs.size());
    if (!all_finite(grads)) {
        mt.skipped = true;
        return mt;
    }
    mt.grad_norm = grad_clip(grads, cfg.max_grad_norm);
    opt.step(params, grads);
    policy.train_step += 1;
    return mt;
}

std::string grpo_metrics_header() {
    return "step,mean_reward,r_face_mean,r_total_mean,kl,clip_frac,grad_norm\n";
}

std::string grpo_metrics_row(const StepMetrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  static_cast<long long>(m.step), m.mean_reward, m.r_face_mean,
                  m.r_total_mean, m.kl, m.clip_frac, m.grad_norm);
    return buf;
}

} // namespace idcr
