#include "idcr/conditioner.hpp"

#include "idcr/errors.hpp"

namespace idcr {

Vocabulary Vocabulary::from(std::vector<std::string> syms) {
    Vocabulary v;
    v.symbols = std::move(syms);
    for (size_t i = 0; i < v.symbols.size(); ++i)
        v.index.emplace(v.symbols[i], static_cast<int>(i));
    if (v.index.size() != v.symbols.size())
        throw config_error("vocabulary: duplicate symbols");
    return v;
}

int Vocabulary::id(const std::string& s) const {
    auto it = index.find(s);
    if (it == index.end()) throw config_error("vocabulary: unknown symbol '" + s + "'");
    return it->second;
}

CondParams init_cond_params(const CondConfig& cfg, int vocab_size, Rng& rng) {
    auto normal = [&rng](std::vector<int> shape, double std) {
        Tensor t(std::move(shape));
        for (auto& v : t.data) v = std * rng.normal();
        return t;
    };
    int pd = cfg.ref_patch * cfg.ref_patch * 3;
    CondParams p;
    p.patch_w = normal({pd, cfg.hidden}, 0.02);
    p.patch_b = Tensor({1, cfg.hidden});
    p.vocab_embed = normal({vocab_size, cfg.hidden}, 0.02);
    p.pool_w = normal({3, cfg.hidden}, 0.02);
    p.pool_b = Tensor({1, cfg.hidden});
    p.null_tokens = normal({cfg.null_len, cfg.hidden}, 0.02);
    return p;
}

Tensor patchify_image(const Tensor& image, int patch) {
    if (image.shape.size() != 3 || image.shape[2] != 3)
        throw shape_error("patchify_image: expected [H,W,3], got " + image.shape_str());
    int H = image.shape[0], W = image.shape[1];
    if (H % patch != 0 || W % patch != 0)
        throw shape_error("patchify_image: dims " + image.shape_str() +
                          " not divisible by patch " + std::to_string(patch));
    int gh = H / patch, gw = W / patch;
    Tensor out({gh * gw, patch * patch * 3});
    int64_t o = 0;
    for (int py = 0; py < gh; ++py)
        for (int px = 0; px < gw; ++px)
            for (int dy = 0; dy < patch; ++dy)
                for (int dx = 0; dx < patch; ++dx)
                    for (int ch = 0; ch < 3; ++ch)
                        out.data[static_cast<size_t>(o++)] =
                            image.data[static_cast<size_t>(
                                ((py * patch + dy) * W + (px * patch + dx)) * 3 + ch)];
    return out;
}

Var encode_subject_t(Tape& t, ParamRef& P, const CondConfig& cfg, const CondParams& params,
                     const Tensor& image) {
    Tensor patches = patchify_image(image, cfg.ref_patch);
    Var x = t.leaf(std::move(patches));
    Var proj = t.matmul(x, P(params.patch_w));
    return t.add_rowvec(proj, P(params.patch_b));
}

Var encode_prompt_t(Tape& t, ParamRef& P, const CondConfig& cfg, const CondParams& params,
                    const Vocabulary& vocab, const std::vector<std::string>& prompt,
                    const std::vector<Tensor>& refs) {
    (void)cfg;
    if (prompt.empty() && refs.empty())
        throw contract_error("encode_prompt: at least one token required");
    std::vector<Var> parts;
    Var table = P(params.vocab_embed);
    for (const auto& sym : prompt) {
        int id = vocab.id(sym);
        parts.push_back(t.slice_rows(table, id, id + 1));
    }
    for (const Tensor& ref : refs) {
        if (ref.shape.size() != 3 || ref.shape[2] != 3)
            throw shape_error("encode_prompt: reference image must be [H,W,3], got " +
                              ref.shape_str());
        // pooled summary: mean RGB over pixels
        Tensor pooled({1, 3});
        int64_t n = ref.numel() / 3;
        for (int64_t i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c)
                pooled.data[static_cast<size_t>(c)] += ref.data[static_cast<size_t>(i * 3 + c)];
        for (auto& v : pooled.data) v /= static_cast<double>(n);
        Var pv = t.matmul(t.leaf(std::move(pooled)), P(params.pool_w));
        parts.push_back(t.add_rowvec(pv, P(params.pool_b)));
    }
    return t.concat_rows(parts);
}

ContextVars build_context_t(Tape& t, Var text, const std::vector<Var>& subjects) {
    int c = t.val(text).shape[1];
    std::vector<Var> parts{text};
    for (Var s : subjects) {
        if (t.val(s).shape[1] != c)
            throw shape_error("build_context: width mismatch, " + t.val(s).shape_str() +
                              " vs width " + std::to_string(c));
        parts.push_back(s);
    }
    ContextVars ctx;
    ctx.tokens = t.concat_rows(parts);
    ctx.n_subjects = static_cast<int>(subjects.size());
    int pos = 0;
    for (Var p : parts) {
        int n = t.val(p).shape[0];
        ctx.segments.push_back({pos, pos + n});
        pos += n;
    }
    return ctx;
}

ContextVars null_context_t(Tape& t, ParamRef& P, const CondParams& params) {
    ContextVars ctx;
    ctx.tokens = P(params.null_tokens);
    ctx.segments.push_back({0, params.null_tokens.shape[0]});
    ctx.n_subjects = 0;
    return ctx;
}

ContextVars encode_context_t(Tape& t, ParamRef& P, const CondConfig& cfg,
                             const CondParams& params, const Vocabulary& vocab,
                             const Cond& cond) {
    Var text = encode_prompt_t(t, P, cfg, params, vocab, cond.prompt, cond.refs);
    std::vector<Var> subjects;
    for (const Tensor& ref : cond.refs)
        subjects.push_back(encode_subject_t(t, P, cfg, params, ref));
    return build_context_t(t, text, subjects);
}

// ------------------------------------------------------------- value wrappers

Tensor encode_subject(const CondConfig& cfg, const CondParams& params, const Tensor& image) {
    Tape t;
    ParamRef P(t);
    return t.val(encode_subject_t(t, P, cfg, params, image));
}

Tensor encode_prompt(const CondConfig& cfg, const CondParams& params, const Vocabulary& vocab,
                     const std::vector<std::string>& prompt, const std::vector<Tensor>& refs) {
    Tape t;
    ParamRef P(t);
    return t.val(encode_prompt_t(t, P, cfg, params, vocab, prompt, refs));
}

ContextTokens build_context(const Tensor& text, const std::vector<Tensor>& subjects) {
    Tape t;
    Var tv = t.leaf(text);
    std::vector<Var> sv;
    for (const Tensor& s : subjects) sv.push_back(t.leaf(s));
    ContextVars cv = build_context_t(t, tv, sv);
    return ContextTokens{t.val(cv.tokens), cv.segments, cv.n_subjects};
}

ContextTokens null_context(const CondParams& params) {
    ContextTokens ctx;
    ctx.tokens = params.null_tokens;
    ctx.segments.push_back({0, params.null_tokens.shape[0]});
    ctx.n_subjects = 0;
    return ctx;
}

ContextTokens encode_context(const CondConfig& cfg, const CondParams& params,
                             const Vocabulary& vocab, const Cond& cond) {
    Tape t;
    ParamRef P(t);
    ContextVars cv = encode_context_t(t, P, cfg, params, vocab, cond);
    return ContextTokens{t.val(cv.tokens), cv.segments, cv.n_subjects};
}

} // namespace idcr
