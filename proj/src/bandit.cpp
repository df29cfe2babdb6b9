#include "idcr/bandit.hpp"

#include <algorithm>
#include <cmath>

#include "idcr/errors.hpp"
#include "idcr/grpo.hpp"
#include "idcr/reward.hpp"
#include "idcr/rng.hpp"

namespace idcr {

double bandit_subject1(double a) { return std::exp(-(a - 1.0) * (a - 1.0)); }
double bandit_subject2(double a) { return std::exp(-(a + 1.0) * (a + 1.0)); }
double bandit_aesthetic(double a) { return std::exp(-(a + 1.5) * (a + 1.5)); }
double bandit_natural(double a) { return std::exp(-(a - 0.25) * (a - 0.25)); }

BanditReward bandit_total_reward(double w_fid, double w_qual, double gamma, double beta_q) {
    return [=](double a) {
        double face = face_reward({bandit_subject1(a), bandit_subject2(a)}, gamma);
        double qual = (1.0 - beta_q) * bandit_aesthetic(a) + beta_q * bandit_natural(a);
        return w_fid * face + w_qual * qual;
    };
}

double bandit_logprob(double action, double theta, double sigma) {
    if (sigma <= 0.0) throw domain_error("bandit_logprob: sigma must be positive");
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    double d = action - theta;
    return -0.5 * std::log(kTwoPi * sigma * sigma) - d * d / (2.0 * sigma * sigma);
}

BanditRunResult bandit_grpo(const BanditReward& reward, const BanditConfig& cfg) {
    if (cfg.group_size < 2) throw config_error("bandit_grpo: group_size must be >= 2");
    double theta = cfg.theta0;
    double theta_ref = cfg.theta0;
    double s2 = cfg.sigma * cfg.sigma;
    BanditRunResult out;
    for (int step = 0; step < cfg.steps; ++step) {
        double theta_old = theta;
        Rng rng = rng_stream(cfg.seed, static_cast<uint64_t>(step), 0xba);
        std::vector<double> actions, rewards;
        for (int i = 0; i < cfg.group_size; ++i) {
            double a = theta_old + cfg.sigma * rng.normal();
            actions.push_back(a);
            rewards.push_back(reward(a));
        }
        std::vector<double> adv = normalize_advantages(rewards);
        // d/dtheta of the clipped surrogate, evaluated at theta (== theta_old
        // at rollout time, so every ratio starts at 1 and no term is clipped)
        double grad = 0;
        for (int i = 0; i < cfg.group_size; ++i) {
            double lp_new = bandit_logprob(actions[static_cast<size_t>(i)], theta, cfg.sigma);
            double lp_old =
                bandit_logprob(actions[static_cast<size_t>(i)], theta_old, cfg.sigma);
            double ratio = std::exp(lp_new - lp_old);
            double a_i = adv[static_cast<size_t>(i)];
            bool unclipped = ratio * a_i <=
                             std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a_i;
            bool inside = ratio > 1.0 - cfg.clip_eps && ratio < 1.0 + cfg.clip_eps;
            if (unclipped || inside)
                grad += a_i * ratio * (actions[static_cast<size_t>(i)] - theta) / s2;
        }
        grad /= cfg.group_size;
        grad -= cfg.kl_coeff * (theta - theta_ref) / s2; // KL of equal-variance Gaussians
        theta += cfg.lr * grad;
        double mr = 0;
        for (double r : rewards) mr += r;
        out.mean_reward.push_back(mr / cfg.group_size);
    }
    out.theta_final = theta;
    return out;
}

BanditDpoResult bandit_dpo(const BanditReward& reward, const BanditConfig& cfg,
                           int n_train_pairs, int n_heldout_pairs) {
    double theta_ref = cfg.theta0;
    double theta = cfg.theta0;
    double s2 = cfg.sigma * cfg.sigma;

    auto make_pairs = [&](uint64_t salt, int n) {
        Rng rng = rng_stream(cfg.seed, salt, 0xd0);
        std::vector<std::pair<double, double>> pairs; // (winner, loser)
        while (static_cast<int>(pairs.size()) < n) {
            double a = theta_ref + cfg.sigma * rng.normal();
            double b = theta_ref + cfg.sigma * rng.normal();
            double ra = reward(a), rb = reward(b);
            if (ra == rb) continue;
            pairs.emplace_back(ra > rb ? a : b, ra > rb ? b : a);
        }
        return pairs;
    };
    auto train = make_pairs(1, n_train_pairs);
    auto heldout = make_pairs(2, n_heldout_pairs);

    auto margin_of = [&](double th, const std::pair<double, double>& p) {
        return (bandit_logprob(p.first, th, cfg.sigma) -
                bandit_logprob(p.first, theta_ref, cfg.sigma)) -
               (bandit_logprob(p.second, th, cfg.sigma) -
                bandit_logprob(p.second, theta_ref, cfg.sigma));
    };
    auto mean_loss = [&](double th) {
        double s = 0;
        for (const auto& p : train)
            s += std::log(1.0 + std::exp(-cfg.eta * margin_of(th, p)));
        return s / static_cast<double>(train.size());
    };

    BanditDpoResult out;
    out.initial_loss = mean_loss(theta);
    out.reward_init = reward(theta);
    for (int step = 0; step < cfg.steps; ++step) {
        double grad = 0;
        for (const auto& p : train) {
            double m = margin_of(theta, p);
            double sig = 1.0 / (1.0 + std::exp(cfg.eta * m)); // sigmoid(-eta m)
            // d margin / d theta = (winner - loser) / sigma^2
            grad += -cfg.eta * sig * (p.first - p.second) / s2;
        }
        grad /= static_cast<double>(train.size());
        theta -= cfg.lr * grad;
    }
    out.theta_final = theta;
    out.final_loss = mean_loss(theta);
    out.reward_final = reward(theta);
    int correct = 0;
    for (const auto& p : heldout)
        if (margin_of(theta, p) > 0) ++correct;
    out.heldout_accuracy = static_cast<double>(correct) / heldout.size();
    return out;
}

std::vector<GammaRow> gamma_sweep(const BanditConfig& cfg, const std::vector<double>& gammas) {
    std::vector<GammaRow> rows;
    for (double g : gammas) {
        BanditReward r = [g](double a) {
            return face_reward({bandit_subject1(a), bandit_subject2(a)}, g);
        };
        BanditRunResult run = bandit_grpo(r, cfg);
        GammaRow row;
        row.gamma = g;
        double s1 = bandit_subject1(run.theta_final);
        double s2 = bandit_subject2(run.theta_final);
        row.avg_facesim = 0.5 * (s1 + s2);
        row.min_facesim = std::min(s1, s2);
        row.total = r(run.theta_final);
        rows.push_back(row);
    }
    return rows;
}

std::vector<RewardAblationRow> reward_ablation(const BanditConfig& cfg) {
    struct Setup {
        std::string label;
        double w_fid, w_qual, beta_q;
    };
    const std::vector<Setup> setups = {{"full", 0.6, 0.4, 0.4},
                                       {"wo_R_fid", 0.0, 1.0, 0.4},
                                       {"wo_R_qual", 1.0, 0.0, 0.4},
                                       {"wo_R_nat", 0.6, 0.4, 0.0}};
    std::vector<RewardAblationRow> rows;
    for (const Setup& s : setups) {
        BanditReward r = bandit_total_reward(s.w_fid, s.w_qual, 0.5, s.beta_q);
        BanditRunResult run = bandit_grpo(r, cfg);
        RewardAblationRow row;
        row.label = s.label;
        row.facesim_final = face_reward(
            {bandit_subject1(run.theta_final), bandit_subject2(run.theta_final)}, 0.5);
        row.reward_final = r(run.theta_final);
        rows.push_back(row);
    }
    return rows;
}

} // namespace idcr
