#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace idcr {

// 1-D Gaussian-policy bandit: a closed-form environment where the GRPO and
// DPO machinery can be exercised end to end and reward trade-offs are forced
// by construction. The two "subjects" peak at actions +1 and -1; a separate
// quality term peaks away from both.

double bandit_subject1(double a); // exp(-(a-1)^2)
double bandit_subject2(double a); // exp(-(a+1)^2)
double bandit_aesthetic(double a); // exp(-(a+1.5)^2)
double bandit_natural(double a);   // exp(-(a-0.25)^2)

using BanditReward = std::function<double(double a)>;

// the composite analogue: w_fid * face(gamma) + w_qual * ((1-b)*aes + b*nat)
BanditReward bandit_total_reward(double w_fid, double w_qual, double gamma, double beta_q);

struct BanditConfig {
    double sigma = 0.5; // fixed policy std
    int group_size = 8;
    double clip_eps = 0.2;
    double kl_coeff = 0.01;
    double lr = 0.05;
    int steps = 100;
    double theta0 = 0.5;
    double eta = 1.0; // DPO temperature
    uint64_t seed = 0;
};

double bandit_logprob(double action, double theta, double sigma);

struct BanditRunResult {
    double theta_final = 0;
    std::vector<double> mean_reward; // per step
};

BanditRunResult bandit_grpo(const BanditReward& reward, const BanditConfig& cfg);

struct BanditDpoResult {
    double theta_final = 0;
    double initial_loss = 0; // at theta == theta_ref (== log 2)
    double final_loss = 0;
    double heldout_accuracy = 0;
    double reward_init = 0, reward_final = 0; // expected reward at the mean action
};

BanditDpoResult bandit_dpo(const BanditReward& reward, const BanditConfig& cfg,
                           int n_train_pairs = 256, int n_heldout_pairs = 256);

struct GammaRow {
    double gamma = 0;
    double avg_facesim = 0, min_facesim = 0, total = 0;
};

// one GRPO run per gamma with face_reward(scores, gamma) as the objective
std::vector<GammaRow> gamma_sweep(const BanditConfig& cfg, const std::vector<double>& gammas);

struct RewardAblationRow {
    std::string label;
    double facesim_final = 0; // face(gamma=0.5) at the final mean action
    double reward_final = 0;
};

// full reward vs component knockouts, identical seeds/budgets
std::vector<RewardAblationRow> reward_ablation(const BanditConfig& cfg);

} // namespace idcr
