#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "idcr/paramref.hpp"
#include "idcr/rng.hpp"
#include "idcr/tensor.hpp"

namespace idcr {

// Closed symbol vocabulary shared between the dataset and the prompt encoder.
struct Vocabulary {
    std::vector<std::string> symbols;
    std::unordered_map<std::string, int> index;

    static Vocabulary from(std::vector<std::string> syms);
    int id(const std::string& s) const; // throws config_error on unknown symbol
    int size() const { return static_cast<int>(symbols.size()); }
};

struct Segment {
    int begin = 0;
    int end = 0;
};

// Concatenated condition sequence [text; subject_1; ...; subject_N].
// segments[0] is the text span; segments[1..N] are the subject spans.
struct ContextTokens {
    Tensor tokens; // [(l' + N*hw) x c]
    std::vector<Segment> segments;
    int n_subjects = 0;
};

// Tape-side variant used during training so gradients reach encoder params.
struct ContextVars {
    Var tokens;
    std::vector<Segment> segments;
    int n_subjects = 0;
};

struct CondConfig {
    int ref_size = 8;  // reference images are ref_size x ref_size x 3
    int ref_patch = 2; // patch embedding size
    int hidden = 32;   // backbone width c
    int null_len = 4;  // learned null sequence length for CFG
};

struct CondParams {
    Tensor patch_w;     // [patch*patch*3, c]
    Tensor patch_b;     // [1, c]
    Tensor vocab_embed; // [V, c]
    Tensor pool_w;      // [3, c]
    Tensor pool_b;      // [1, c]
    Tensor null_tokens; // [null_len, c]

    template <typename F> void for_each(F&& f) {
        f("cond.patch_w", patch_w);
        f("cond.patch_b", patch_b);
        f("cond.vocab_embed", vocab_embed);
        f("cond.pool_w", pool_w);
        f("cond.pool_b", pool_b);
        f("cond.null_tokens", null_tokens);
    }
};

CondParams init_cond_params(const CondConfig& cfg, int vocab_size, Rng& rng);

// A raw condition: prompt symbols plus reference images [H x W x 3].
struct Cond {
    std::vector<std::string> prompt;
    std::vector<Tensor> refs;
};

// image [H,W,3] -> [num_patches, patch*patch*3], patches row-major
Tensor patchify_image(const Tensor& image, int patch);

Var encode_subject_t(Tape& t, ParamRef& P, const CondConfig& cfg, const CondParams& params,
                     const Tensor& image);
Var encode_prompt_t(Tape& t, ParamRef& P, const CondConfig& cfg, const CondParams& params,
                    const Vocabulary& vocab, const std::vector<std::string>& prompt,
                    const std::vector<Tensor>& refs);
ContextVars build_context_t(Tape& t, Var text, const std::vector<Var>& subjects);
ContextVars null_context_t(Tape& t, ParamRef& P, const CondParams& params);
ContextVars encode_context_t(Tape& t, ParamRef& P, const CondConfig& cfg,
                             const CondParams& params, const Vocabulary& vocab,
                             const Cond& cond);

// Value-path conveniences (scratch tape internally).
Tensor encode_subject(const CondConfig& cfg, const CondParams& params, const Tensor& image);
Tensor encode_prompt(const CondConfig& cfg, const CondParams& params, const Vocabulary& vocab,
                     const std::vector<std::string>& prompt, const std::vector<Tensor>& refs);
ContextTokens build_context(const Tensor& text, const std::vector<Tensor>& subjects);
ContextTokens null_context(const CondParams& params);
ContextTokens encode_context(const CondConfig& cfg, const CondParams& params,
                             const Vocabulary& vocab, const Cond& cond);

} // namespace idcr
