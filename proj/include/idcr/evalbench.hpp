#pragma once

#include <functional>
#include <string>
#include <vector>

#include "idcr/flow.hpp"
#include "idcr/hia.hpp"
#include "idcr/reward.hpp"
#include "idcr/sprites.hpp"

namespace idcr {

// Evaluation metrics over generated or ground-truth videos, plus report and
// ablation plumbing. Real embedding models are replaced by histogram/motion
// proxies behind the Embedder boundary.

struct Embedder {
    std::string name;
    // unit-norm vector from masked pixels; mask == nullptr means "non-background"
    std::function<std::vector<double>(const double* rgb, const double* mask, int n_pixels)>
        embed;
};

Embedder histogram_embedder(); // L2-normalized 4^3 color histogram

// mean over visible frames of cosine(embed(reference), embed(frame & mask));
// subject_masks: [F, H, W]
double nexus_score(const Tensor& video, const Tensor& reference, const Tensor& subject_masks,
                   const Embedder& e);

struct FaceSimResult {
    std::vector<double> per_subject;
    double mean = 0, min = 0;
};
FaceSimResult facesim_analogue(const Tensor& video, const std::vector<Tensor>& references,
                               const Tensor& masks);

// whole-video embedding (global color histogram + fitted motion) against the
// statistics the prompt codes imply; in [-1, 1]
double gme_analogue(const Tensor& video, const std::vector<std::string>& prompt_code);

struct EvalRow {
    int sample_id = 0;
    double facesim_mean = 0, facesim_min = 0, nexus = 0, gme = 0;
    double natural = 0, aesthetic = 0;
    double total = 0; // filled by finalize_totals
};

struct EvalReport {
    std::vector<EvalRow> rows;
    EvalRow aggregate; // column means over rows

    void finalize_totals(const std::vector<double>& weights = {}); // default: equal
    std::string to_csv() const;
};

// batch min-max normalized weighted sum; constant columns count as 0.5
std::vector<double> total_eval_score(const std::vector<std::vector<double>>& metric_rows,
                                     const std::vector<double>& weights);

// extract the [F,H,W] mask channel of one subject
Tensor subject_mask_channel(const Tensor& masks, int subject);

struct EvalConfig {
    int sample_steps = 10;
    double cfg_scale = 1.5;
    uint64_t seed = 0;
    SampleMode mode = SampleMode::ODE;
};

// sample one video for a condition with the model's own context encoders
Tensor sample_video(const Model& m, const Cond& cond, const SamplerConfig& cfg,
                    uint64_t traj_index = 0);

// generate a video per scene and score it against the scene's references
EvalReport evaluate_model(const Model& m, const std::vector<SceneSample>& scenes,
                          const EvalConfig& cfg);
// score the stored ground-truth videos themselves (oracle bypass)
EvalReport evaluate_ground_truth(const std::vector<SceneSample>& scenes);

} // namespace idcr
