#pragma once

#include <optional>
#include <string>
#include <vector>

#include "idcr/conditioner.hpp"
#include "idcr/paramref.hpp"
#include "idcr/tensor.hpp"

namespace idcr {

// Transformer velocity network. The first hia_depth blocks run the three-stage
// identity-preserving attention (per-subject self-attention, gated
// inter-subject cross-attention, cross-modal attention into the video tokens)
// before the usual video self-attention + MLP sublayers.
struct BackboneConfig {
    int depth = 6;
    int hia_depth = 4;
    int hidden = 32;
    int heads = 4;
    int frames = 8, height = 16, width = 16, channels = 3;
    int patch_t = 2, patch_s = 4; // temporal / spatial video patch size
    bool stage1 = true, stage2 = true, stage3 = true; // ablation switches
    bool force_gate_zero = false;                     // test hook: stage-2 gate = 0

    void validate() const;
    int video_patch_dim() const { return patch_t * patch_s * patch_s * channels; }
    int n_video_tokens() const {
        return (frames / patch_t) * (height / patch_s) * (width / patch_s);
    }
    std::vector<int> video_shape() const { return {frames, height, width, channels}; }
};

struct AttnParams {
    Tensor wq, wk, wv, wo; // all [c, c]
    template <typename F> void for_each(const std::string& p, F&& f) {
        f(p + ".wq", wq);
        f(p + ".wk", wk);
        f(p + ".wv", wv);
        f(p + ".wo", wo);
    }
};

struct BlockParams {
    Tensor norm_attn_g, norm_mlp_g; // [1, c]
    Tensor time_w;                  // [c, c], per-block timestep injection
    AttnParams attn;
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
    template <typename F> void for_each(const std::string& p, F&& f) {
        f(p + ".norm_attn_g", norm_attn_g);
        f(p + ".norm_mlp_g", norm_mlp_g);
        f(p + ".time_w", time_w);
        attn.for_each(p + ".attn", f);
        f(p + ".mlp_w1", mlp_w1);
        f(p + ".mlp_b1", mlp_b1);
        f(p + ".mlp_w2", mlp_w2);
        f(p + ".mlp_b2", mlp_b2);
    }
};

struct HiaParams {
    AttnParams s1, s2, s3;
    Tensor gate_w;   // [c, c], zero-init so the gate opens at 0.5
    Tensor s3_norm_g; // [1, c]
    template <typename F> void for_each(const std::string& p, F&& f) {
        s1.for_each(p + ".s1", f);
        s2.for_each(p + ".s2", f);
        s3.for_each(p + ".s3", f);
        f(p + ".gate_w", gate_w);
        f(p + ".s3_norm_g", s3_norm_g);
    }
};

struct ModelParams {
    CondParams cond;
    Tensor video_patch_w, video_patch_b;
    Tensor video_pos; // [n_video_tokens, c]
    Tensor time_w;      // [c, c]
    Tensor time_gain_w; // [c, c], timestep-conditioned output gain (zero-init)
    Tensor skip_gain_w; // [c, patch_dim], timestep-scaled input skip (zero-init)
    Tensor skip_bias_w; // [c, patch_dim], timestep-dependent output bias (zero-init)
    std::vector<HiaParams> hia;
    std::vector<BlockParams> blocks;
    Tensor final_norm_g, unpatch_w, unpatch_b;

    template <typename F> void for_each(F&& f) {
        cond.for_each(f);
        f("video.patch_w", video_patch_w);
        f("video.patch_b", video_patch_b);
        f("video.pos", video_pos);
        f("video.time_w", time_w);
        f("video.time_gain_w", time_gain_w);
        f("video.skip_gain_w", skip_gain_w);
        f("video.skip_bias_w", skip_bias_w);
        for (size_t i = 0; i < hia.size(); ++i) hia[i].for_each("hia" + std::to_string(i), f);
        for (size_t i = 0; i < blocks.size(); ++i)
            blocks[i].for_each("block" + std::to_string(i), f);
        f("final_norm_g", final_norm_g);
        f("unpatch_w", unpatch_w);
        f("unpatch_b", unpatch_b);
    }
};

// standard sinusoidal embedding, base 10000; dim must be even
Tensor timestep_embedding(double t, int dim);

// video [f,h,w,ch] <-> tokens [n_tok, patch_dim]
Tensor patchify_video(const Tensor& video, const BackboneConfig& cfg);
// permutation table mapping token-major flat order to video flat order
std::shared_ptr<const std::vector<int64_t>> unpatchify_index(const BackboneConfig& cfg);

// multi-head attention; rows of q_in attend over rows of kv_in
Var attention_t(Tape& t, ParamRef& P, const AttnParams& w, int heads, Var q_in, Var kv_in);

std::vector<Var> intra_subject_attention_t(Tape& t, ParamRef& P, const HiaParams& hp,
                                           int heads, const std::vector<Var>& subjects);
std::vector<Var> gated_inter_subject_attention_t(Tape& t, ParamRef& P, const HiaParams& hp,
                                                 int heads, const std::vector<Var>& refined,
                                                 std::optional<double> gate_override = {});
Var cross_modal_attention_t(Tape& t, ParamRef& P, const HiaParams& hp, int heads, Var video,
                            const std::vector<Var>& subjects, Var text);

Var predict_velocity_t(Tape& t, ParamRef& P, const BackboneConfig& cfg,
                       const ModelParams& params, const Tensor& z, double time,
                       const ContextVars& ctx);

// Full model bundle: config, vocabulary, parameters, persistence.
struct Model {
    BackboneConfig cfg;
    CondConfig cond_cfg;
    Vocabulary vocab;
    ModelParams params;
    int64_t train_step = 0;

    static Model init(const BackboneConfig& cfg, const CondConfig& ccfg, Vocabulary vocab,
                      uint64_t seed);

    ContextTokens encode(const Cond& cond) const;
    ContextTokens null_ctx() const;
    // no-grad forward (scratch tape)
    Tensor velocity(const Tensor& z, double time, const ContextTokens& ctx) const;

    void save(const std::string& path);
    static Model load(const std::string& path);

    std::vector<std::pair<std::string, Tensor*>> param_list();
};

// tape builder that takes a precomputed (constant) context
Var predict_velocity_ctx_t(Tape& t, ParamRef& P, const BackboneConfig& cfg,
                           const ModelParams& params, const Tensor& z, double time,
                           const ContextTokens& ctx);

} // namespace idcr
