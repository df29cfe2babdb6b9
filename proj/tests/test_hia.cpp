#include <doctest.h>

#include <cmath>
#include <set>

#include "idcr/hia.hpp"
#include "idcr/rng.hpp"

using namespace idcr;

namespace {

Tensor randn(std::vector<int> shape, uint64_t seed) {
    Tensor t(std::move(shape));
    Rng rng = rng_stream(seed);
    for (auto& x : t.data) x = rng.normal();
    return t;
}

BackboneConfig tiny_backbone() {
    BackboneConfig cfg;
    cfg.depth = 2;
    cfg.hia_depth = 1;
    cfg.hidden = 8;
    cfg.heads = 2;
    cfg.frames = 2;
    cfg.height = 4;
    cfg.width = 4;
    cfg.patch_t = 2;
    cfg.patch_s = 2;
    return cfg;
}

Model tiny_model(uint64_t seed = 99) {
    BackboneConfig cfg = tiny_backbone();
    CondConfig ccfg;
    ccfg.ref_size = 4;
    ccfg.ref_patch = 2;
    ccfg.hidden = cfg.hidden;
    ccfg.null_len = 2;
    return Model::init(cfg, ccfg, Vocabulary::from({"a", "b", "c"}), seed);
}

Cond tiny_cond(int n_subjects, uint64_t seed = 5) {
    Cond c;
    const char* syms[] = {"a", "b", "c"};
    for (int i = 0; i < n_subjects; ++i) {
        c.prompt.push_back(syms[i % 3]);
        Tensor ref({4, 4, 3});
        Rng rng = rng_stream(seed, static_cast<uint64_t>(i));
        for (auto& x : ref.data) x = rng.uniform();
        c.refs.push_back(ref);
    }
    return c;
}

HiaParams random_hia(int c, uint64_t seed) {
    Rng rng = rng_stream(seed);
    auto mk = [&](std::vector<int> s) {
        Tensor t(std::move(s));
        for (auto& x : t.data) x = 0.2 * rng.normal();
        return t;
    };
    HiaParams hp;
    for (AttnParams* a : {&hp.s1, &hp.s2, &hp.s3}) {
        a->wq = mk({c, c});
        a->wk = mk({c, c});
        a->wv = mk({c, c});
        a->wo = mk({c, c});
    }
    hp.gate_w = Tensor({c, c}); // zero: gate sits at 0.5
    hp.s3_norm_g = Tensor::full({1, c}, 1.0);
    return hp;
}

} // namespace

TEST_CASE("backbone config validation") {
    BackboneConfig cfg = tiny_backbone();
    cfg.validate();
    cfg.hia_depth = 3;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = tiny_backbone();
    cfg.heads = 3;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = tiny_backbone();
    cfg.patch_s = 3;
    CHECK_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("timestep embedding") {
    Tensor e0 = timestep_embedding(0.0, 8);
    for (int i = 0; i < 4; ++i) {
        CHECK(e0[2 * i] == 0.0);     // sin 0
        CHECK(e0[2 * i + 1] == 1.0); // cos 0
    }
    std::set<std::vector<double>> seen;
    for (int i = 0; i < 50; ++i)
        seen.insert(timestep_embedding(i / 49.0, 8).data);
    CHECK(seen.size() == 50);
    double norm2 = 0;
    for (double v : timestep_embedding(0.37, 8).data) norm2 += v * v;
    CHECK(std::sqrt(norm2) <= std::sqrt(8.0) + 1e-12);
    CHECK_THROWS_AS(timestep_embedding(0.5, 7), shape_error);
}

TEST_CASE("video patchify round-trips through the unpatch index") {
    BackboneConfig cfg = tiny_backbone();
    Tensor video = randn(cfg.video_shape(), 21);
    Tensor tok = patchify_video(video, cfg);
    CHECK(tok.shape == std::vector<int>{cfg.n_video_tokens(), cfg.video_patch_dim()});

    Tape t;
    Var v = t.permute_flat(t.leaf(tok), unpatchify_index(cfg), cfg.video_shape());
    CHECK(t.val(v).data == video.data);
}

TEST_CASE("single-token attention reduces to the value path") {
    const int c = 8;
    HiaParams hp = random_hia(c, 31);
    Tensor x = randn({1, c}, 32);
    Tape t;
    ParamRef P(t);
    Var out = attention_t(t, P, hp.s1, 2, t.leaf(x), t.leaf(x));
    Var expect = t.matmul(t.matmul(t.leaf(x), P(hp.s1.wv)), P(hp.s1.wo));
    for (int i = 0; i < c; ++i)
        CHECK(t.val(out)[i] == doctest::Approx(t.val(expect)[i]).epsilon(1e-12));
}

TEST_CASE("per-subject self-attention is isolated and symmetric") {
    const int c = 8;
    HiaParams hp = random_hia(c, 41);
    Tensor a = randn({3, c}, 42), b = randn({3, c}, 43);

    Tape t;
    ParamRef P(t);
    auto outs = intra_subject_attention_t(t, P, hp, 2, {t.leaf(a), t.leaf(b)});
    auto outs_same = intra_subject_attention_t(t, P, hp, 2, {t.leaf(a), t.leaf(a)});
    // identical subjects refine identically
    CHECK(t.val(outs_same[0]).data == t.val(outs_same[1]).data);
    // zeroing subject 1 leaves subject 0's refinement unchanged
    auto outs_zeroed =
        intra_subject_attention_t(t, P, hp, 2, {t.leaf(a), t.leaf(Tensor({3, c}))});
    CHECK(t.val(outs_zeroed[0]).data == t.val(outs[0]).data);
}

TEST_CASE("gated inter-subject attention") {
    const int c = 8;
    HiaParams hp = random_hia(c, 51);
    Tensor a = randn({3, c}, 52), b = randn({3, c}, 53);

    SUBCASE("one subject passes through untouched") {
        Tape t;
        ParamRef P(t);
        Var va = t.leaf(a);
        auto outs = gated_inter_subject_attention_t(t, P, hp, 2, {va});
        CHECK(t.val(outs[0]).data == a.data);
    }
    SUBCASE("gate forced to zero leaves the residual only") {
        Tape t;
        ParamRef P(t);
        auto outs = gated_inter_subject_attention_t(t, P, hp, 2, {t.leaf(a), t.leaf(b)}, 0.0);
        CHECK(t.val(outs[0]).data == a.data);
        CHECK(t.val(outs[1]).data == b.data);
    }
    SUBCASE("zero gate weights open the gate at one half") {
        Tape t;
        ParamRef P(t);
        auto def = gated_inter_subject_attention_t(t, P, hp, 2, {t.leaf(a), t.leaf(b)});
        auto full = gated_inter_subject_attention_t(t, P, hp, 2, {t.leaf(a), t.leaf(b)}, 1.0);
        for (size_t i = 0; i < a.data.size(); ++i) {
            double half = t.val(def[0])[static_cast<int64_t>(i)] - a.data[i];
            double whole = t.val(full[0])[static_cast<int64_t>(i)] - a.data[i];
            CHECK(half == doctest::Approx(0.5 * whole).epsilon(1e-12));
        }
    }
}

TEST_CASE("cross-modal attention is invariant to subject order") {
    const int c = 8;
    HiaParams hp = random_hia(c, 61);
    Tensor z = randn({4, c}, 62), s0 = randn({3, c}, 63), s1 = randn({2, c}, 64);
    Tensor txt = randn({2, c}, 65);

    Tape t;
    ParamRef P(t);
    Var a = cross_modal_attention_t(t, P, hp, 2, t.leaf(z), {t.leaf(s0), t.leaf(s1)},
                                    t.leaf(txt));
    Var b = cross_modal_attention_t(t, P, hp, 2, t.leaf(z), {t.leaf(s1), t.leaf(s0)},
                                    t.leaf(txt));
    for (size_t i = 0; i < z.data.size(); ++i)
        CHECK(std::abs(t.val(a)[static_cast<int64_t>(i)] -
                       t.val(b)[static_cast<int64_t>(i)]) < 1e-10);
}

TEST_CASE("velocity network shape, determinism, and subject permutation") {
    Model m = tiny_model();
    Cond cond = tiny_cond(2);
    Tensor z = randn(m.cfg.video_shape(), 71);

    ContextTokens ctx = m.encode(cond);
    Tensor v1 = m.velocity(z, 0.4, ctx);
    Tensor v2 = m.velocity(z, 0.4, ctx);
    CHECK(v1.shape == z.shape);
    CHECK(v1.data == v2.data);

    Cond swapped;
    swapped.prompt = {cond.prompt[1], cond.prompt[0]};
    swapped.refs = {cond.refs[1], cond.refs[0]};
    Tensor v3 = m.velocity(z, 0.4, m.encode(swapped));
    double worst = 0;
    for (size_t i = 0; i < v1.data.size(); ++i)
        worst = std::max(worst, std::abs(v1.data[i] - v3.data[i]));
    CHECK(worst < 1e-10);
}

TEST_CASE("velocity gradients match finite differences on a 2-block model") {
    Model m = tiny_model();
    Cond cond = tiny_cond(2);
    Tensor z = randn(m.cfg.video_shape(), 81);
    const double time = 0.6;

    auto loss_value = [&]() {
        Tape t;
        ParamRef P(t);
        ContextVars cv = encode_context_t(t, P, m.cond_cfg, m.params.cond, m.vocab, cond);
        Var v = predict_velocity_t(t, P, m.cfg, m.params, z, time, cv);
        return t.val(t.sumsq(v)).data[0];
    };

    Tape t;
    ParamRef P(t);
    ContextVars cv = encode_context_t(t, P, m.cond_cfg, m.params.cond, m.vocab, cond);
    Var v = predict_velocity_t(t, P, m.cfg, m.params, z, time, cv);
    t.backward(t.sumsq(v));

    const double h = 1e-5;
    double worst = 0;
    // spot-check a handful of elements per parameter (full sweep is the
    // acceptance test's job)
    for (auto& [name, p] : m.param_list()) {
        Tensor g = P.grad_of(*p);
        int64_t n = p->numel();
        for (int64_t i = 0; i < n; i += std::max<int64_t>(1, n / 3)) {
            double orig = (*p)[i];
            (*p)[i] = orig + h;
            double fp = loss_value();
            (*p)[i] = orig - h;
            double fm = loss_value();
            (*p)[i] = orig;
            double numeric = (fp - fm) / (2 * h);
            double rel = std::abs(g[i] - numeric) / (std::abs(g[i]) + 1e-8);
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("model save/load round-trip") {
    Model m = tiny_model();
    std::string path = "tiny_model_rt.idcr";
    m.train_step = 17;
    m.save(path);
    Model n = Model::load(path);
    CHECK(n.train_step == 17);
    CHECK(n.cfg.depth == m.cfg.depth);
    CHECK(n.vocab.symbols == m.vocab.symbols);
    Cond cond = tiny_cond(1);
    Tensor z = randn(m.cfg.video_shape(), 91);
    CHECK(m.velocity(z, 0.3, m.encode(cond)).data ==
          n.velocity(z, 0.3, n.encode(cond)).data);
    std::remove(path.c_str());
}
