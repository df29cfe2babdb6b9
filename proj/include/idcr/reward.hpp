#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "idcr/tensor.hpp"

namespace idcr {

// Composite reward: fidelity (per-subject identity + holistic subject
// consistency) mixed with quality (aesthetic + temporal naturalness). All
// scorers are exact deterministic proxies computable from pixels.

struct RewardWeights {
    double w_fid = 0.6;
    double w_qual = 0.4;
    double alpha = 0.5;  // face vs subject inside fidelity
    double beta_q = 0.4; // aesthetic vs natural inside quality
    double gamma = 0.5;  // mean vs min across per-subject identity scores

    void validate() const; // each in [0,1]; w_fid + w_qual == 1
};

struct RewardBreakdown {
    std::vector<double> per_subject_id;
    double r_face = 0, r_subject = 0, r_fid = 0;
    double r_aes = 0, r_nat = 0, r_qual = 0;
    double r_total = 0;
    bool empty_mask_warning = false;
};

double face_reward(const std::vector<double>& per_subject, double gamma);
double fidelity_reward(double r_face, double r_subject, double alpha);
double quality_reward(double r_aes, double r_nat, double beta_q);
double frame_average(const std::vector<double>& frame_rewards);

RewardBreakdown total_reward(const std::vector<double>& per_subject_id, double r_subject,
                             double r_aes, double r_nat, const RewardWeights& w);

// 4 bins per channel over masked pixels, L1-normalized
std::vector<double> color_histogram(const double* rgb, const double* mask, int n_pixels);
// histogram of a reference image's non-background pixels
std::vector<double> reference_histogram(const Tensor& ref);
double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct IdentityResult {
    std::vector<double> per_subject;
    bool empty_mask_warning = false;
};

// cosine of masked color histograms vs each reference, averaged over frames
// where the subject is visible; subjects never visible score 0 with a warning
IdentityResult identity_proxy(const Tensor& video, const std::vector<Tensor>& references,
                              const Tensor& masks);

// holistic subject consistency: pooled histogram over all subject masks vs
// pooled reference histograms, frame-averaged
double subject_proxy(const Tensor& video, const std::vector<Tensor>& references,
                     const Tensor& masks);

double aesthetic_proxy(const Tensor& video);
double natural_proxy(const Tensor& video);

// color-nearest-neighbor segmenter for generated videos: a pixel belongs to
// the reference whose mean sprite color it is closest to, if it deviates
// enough from the background; reproduces ground-truth masks on clean renders
Tensor segment_video(const Tensor& video, const std::vector<Tensor>& references);

// full scoring of a generated video against its condition's references
RewardBreakdown score_video(const Tensor& video, const std::vector<Tensor>& references,
                            const RewardWeights& w);
// same, but with externally supplied masks (ground-truth path)
RewardBreakdown score_video_masked(const Tensor& video, const std::vector<Tensor>& references,
                                   const Tensor& masks, const RewardWeights& w);

// named-scorer registry so alternative backends can replace the proxies
using Scorer =
    std::function<double(const Tensor& video, const std::vector<Tensor>& references,
                         const Tensor& masks)>;
std::map<std::string, Scorer>& scorer_registry();

} // namespace idcr
