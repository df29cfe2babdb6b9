#include <doctest.h>

#include "idcr/conditioner.hpp"
#include "idcr/rng.hpp"
#include "idcr/sprites.hpp"

using namespace idcr;

namespace {

Tensor random_image(int hw, uint64_t seed) {
    Tensor img({hw, hw, 3});
    Rng rng = rng_stream(seed);
    for (auto& x : img.data) x = rng.uniform();
    return img;
}

struct Fixture {
    CondConfig cfg;
    Vocabulary vocab = default_vocabulary();
    CondParams params;
    Fixture() {
        cfg.ref_size = 8;
        cfg.ref_patch = 2;
        cfg.hidden = 16;
        cfg.null_len = 4;
        Rng rng = rng_stream(123);
        params = init_cond_params(cfg, vocab.size(), rng);
    }
};

} // namespace

TEST_CASE("vocabulary lookups") {
    Vocabulary v = default_vocabulary();
    CHECK(v.size() == 216); // 8 colors x 3 shapes x 9 motions
    CHECK(v.id(v.symbols[17]) == 17);
    CHECK_THROWS_AS(v.id("no_such_symbol"), config_error);
}

TEST_CASE("image patchify") {
    Tensor img = random_image(8, 4);
    Tensor tok = patchify_image(img, 2);
    CHECK(tok.shape == std::vector<int>{16, 12});
    Tensor tok2 = patchify_image(img, 2);
    CHECK(tok.data == tok2.data);
    Tensor zero = patchify_image(Tensor({8, 8, 3}), 2);
    for (double x : zero.data) CHECK(x == 0.0);
}

TEST_CASE("prompt encoding token counts") {
    Fixture fx;
    std::vector<std::string> prompt = {fx.vocab.symbols[0], fx.vocab.symbols[1],
                                       fx.vocab.symbols[2]};
    std::vector<Tensor> refs = {random_image(8, 1), random_image(8, 2)};
    Tensor text = encode_prompt(fx.cfg, fx.params, fx.vocab, prompt, refs);
    CHECK(text.shape == std::vector<int>{5, 16}); // 3 symbols + 2 pooled images

    CHECK_THROWS_AS(encode_prompt(fx.cfg, fx.params, fx.vocab, {}, {}), contract_error);

    // swapping the reference images permutes only the pooled-image rows
    Tensor swapped =
        encode_prompt(fx.cfg, fx.params, fx.vocab, prompt, {refs[1], refs[0]});
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 16; ++c) CHECK(swapped[r * 16 + c] == text[r * 16 + c]);
    for (int c = 0; c < 16; ++c) {
        CHECK(swapped[3 * 16 + c] == text[4 * 16 + c]);
        CHECK(swapped[4 * 16 + c] == text[3 * 16 + c]);
    }
}

TEST_CASE("context assembly") {
    Fixture fx;
    std::vector<std::string> prompt = {fx.vocab.symbols[0], fx.vocab.symbols[1],
                                       fx.vocab.symbols[2]};
    std::vector<Tensor> refs = {random_image(8, 1), random_image(8, 2)};
    Tensor text = encode_prompt(fx.cfg, fx.params, fx.vocab, prompt, refs);
    Tensor s0 = encode_subject(fx.cfg, fx.params, refs[0]);
    Tensor s1 = encode_subject(fx.cfg, fx.params, refs[1]);
    CHECK(s0.shape == std::vector<int>{16, 16}); // (8/2)^2 patch tokens

    ContextTokens ctx = build_context(text, {s0, s1});
    CHECK(ctx.tokens.shape == std::vector<int>{37, 16});
    REQUIRE(ctx.segments.size() == 3);
    CHECK(ctx.n_subjects == 2);
    CHECK(ctx.segments[0].begin == 0);
    CHECK(ctx.segments[0].end == 5);
    CHECK(ctx.segments[1].end - ctx.segments[1].begin == 16);

    // segment slices reassemble to the inputs exactly
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c)
            CHECK(ctx.tokens[(ctx.segments[1].begin + r) * 16 + c] == s0[r * 16 + c]);

    ContextTokens text_only = build_context(text, {});
    CHECK(text_only.tokens.data == text.data);
    CHECK(text_only.n_subjects == 0);
}

TEST_CASE("null context is stable and sized by config") {
    Fixture fx;
    ContextTokens a = null_context(fx.params);
    ContextTokens b = null_context(fx.params);
    CHECK(a.tokens.data == b.tokens.data);
    CHECK(a.tokens.shape == std::vector<int>{4, 16});
    CHECK(a.n_subjects == 0);
}
