#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idcr/evalbench.hpp"
#include "idcr/flow.hpp"
#include "idcr/hia.hpp"
#include "idcr/reward.hpp"
#include "idcr/sprites.hpp"

namespace idcr {

// Online group-relative policy optimization over the SDE sampler's per-step
// Gaussian transition densities, plus the offline DPO baseline.

struct TrainConfig {
    int group_size = 8;
    double clip_eps = 0.2;
    double kl_coeff = 0.01;
    double lr = 1e-5;
    double beta1 = 0.9, beta2 = 0.95;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    double max_grad_norm = 1.0;
    int batch_size = 32; // conditions per outer step
    double noise_a = 1.0;
    uint64_t seed = 0;
    int sample_steps = 8;   // SDE steps per rollout
    double cfg_scale = 1.0; // guidance during rollouts
    double dpo_eta = 1.0;

    void validate() const; // group_size >= 2, clip_eps > 0, noise_a > 0
};

class AdamW {
  public:
    AdamW(double lr, double beta1, double beta2, double eps, double weight_decay = 0.0)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {}

    void step(const std::vector<std::pair<std::string, Tensor*>>& params,
              const std::vector<Tensor>& grads);
    int64_t t() const { return t_; }

  private:
    double lr_, beta1_, beta2_, eps_, wd_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

// rescales in place when the global L2 norm exceeds max_norm; returns the
// pre-clip norm
double grad_clip(std::vector<Tensor>& grads, double max_norm);

// (r_i - mean) / (population std + 1e-8); all-equal rewards give all zeros
std::vector<double> normalize_advantages(const std::vector<double>& rewards);

double clipped_objective(double ratio, double advantage, double clip_eps);

// KL between isotropic Gaussians of equal std: ||mu_new - mu_ref||^2 / (2 std^2)
double kl_penalty(const Tensor& new_mean, const Tensor& ref_mean, double stddev);

struct GroupRollout {
    Cond cond;
    std::vector<Trajectory> trajs;
    std::vector<RewardBreakdown> breakdowns;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

// G SDE rollouts of one condition from the (frozen) policy, scored and
// advantage-normalized; deterministic in (cfg.seed, outer_step, condition_index)
GroupRollout rollout_group(const Model& policy, const SceneSample& scene,
                           const RewardWeights& w, const TrainConfig& cfg,
                           uint64_t outer_step, uint64_t condition_index);

struct StepMetrics {
    int64_t step = 0;
    double mean_reward = 0, r_face_mean = 0, r_total_mean = 0;
    double kl = 0, clip_frac = 0, grad_norm = 0, mean_ratio = 0;
    bool skipped = false; // non-finite gradient
};

// ratio at (traj, step) under the current parameters; context must be the
// encoding of the trajectory's condition
double step_ratio(const Model& policy, const Trajectory& traj, int step,
                  const ContextTokens& ctx, double cfg_scale, double noise_a);

// one clipped-surrogate + KL ascent step; rollouts must come from the policy
// state at the start of the outer step (pi_old), ref is the frozen SFT policy
StepMetrics grpo_update(Model& policy, const Model& ref,
                        const std::vector<GroupRollout>& groups, AdamW& opt,
                        const TrainConfig& cfg);

struct PreferencePair {
    Cond cond;
    Trajectory winner;
    Trajectory loser;
};

// pairs from pre-generated groups, best vs worst by r_total; equal-reward
// groups yield no pair
std::vector<PreferencePair> build_preference_pairs(const std::vector<GroupRollout>& groups);

struct DpoMetrics {
    int64_t step = 0;
    double loss = 0, margin = 0, grad_norm = 0;
    bool skipped = false;
};

DpoMetrics dpo_baseline_update(Model& policy, const Model& ref,
                               const std::vector<PreferencePair>& pairs, AdamW& opt,
                               const TrainConfig& cfg);

std::string grpo_metrics_header();                // csv
std::string grpo_metrics_row(const StepMetrics&); // csv

} // namespace idcr
