#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "idcr/evalbench.hpp"
#include "idcr/rng.hpp"

using namespace idcr;

namespace {

// paint a solid-color frame sequence with full masks
Tensor solid_video(int F, int H, int W, const double rgb[3]) {
    Tensor v({F, H, W, 3});
    for (int64_t i = 0; i < v.numel(); i += 3)
        for (int c = 0; c < 3; ++c) v[i + c] = rgb[c];
    return v;
}

} // namespace

TEST_CASE("embedding similarity on matched and orthogonal colors") {
    const double red[3] = {1, 0, 0}, blue[3] = {0, 0, 1};
    Tensor ref({4, 4, 3});
    for (int64_t i = 0; i < ref.numel(); i += 3) ref[i] = 1.0; // all red
    Tensor video = solid_video(2, 4, 4, red);
    Tensor masks = Tensor::full({2, 4, 4}, 1.0);

    Embedder e = histogram_embedder();
    CHECK(nexus_score(video, ref, masks, e) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(nexus_score(solid_video(2, 4, 4, blue), ref, masks, e) < 1e-9);
}

TEST_CASE("per-frame similarities average") {
    const double red[3] = {1, 0, 0}, blue[3] = {0, 0, 1};
    Tensor ref({4, 4, 3});
    for (int64_t i = 0; i < ref.numel(); i += 3) ref[i] = 1.0;
    // frame 0 red (sim 1), frame 1 blue (sim 0)
    Tensor video({2, 4, 4, 3});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) {
                video[((0 * 4 + y) * 4 + x) * 3 + c] = red[c];
                video[((1 * 4 + y) * 4 + x) * 3 + c] = blue[c];
            }
    Tensor masks = Tensor::full({2, 4, 4}, 1.0);
    CHECK(nexus_score(video, ref, masks, histogram_embedder()) ==
          doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("identity metric on ground truth") {
    SceneSample s = gen_scene(61, 2);
    FaceSimResult r = facesim_analogue(s.video, s.references, s.masks);
    CHECK(r.mean >= 0.999);
    CHECK(r.min >= 0.999);
    REQUIRE(r.per_subject.size() == 2);

    SceneSample one = gen_scene(62, 1);
    FaceSimResult r1 = facesim_analogue(one.video, one.references, one.masks);
    CHECK(r1.mean == r1.min);
}

TEST_CASE("corrupting one subject drags the min below the mean") {
    SceneSample s = gen_scene(63, 2);
    while (s.specs[0].color == 2 || s.specs[1].color == 2) s = gen_scene(s.seed + 1, 2);
    Tensor tampered = s.video;
    int F = s.masks.shape[0], N = s.masks.shape[1], H = s.masks.shape[2],
        W = s.masks.shape[3];
    for (int f = 0; f < F; ++f)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                if (s.masks[((f * N + 0) * H + y) * W + x] > 0) {
                    int64_t p = ((f * H + y) * W + x) * 3;
                    tampered[p] = 0;
                    tampered[p + 1] = 0;
                    tampered[p + 2] = 1;
                }
    FaceSimResult r = facesim_analogue(tampered, s.references, s.masks);
    CHECK(r.min < r.mean);
}

TEST_CASE("identity metric ignores out-of-mask edits") {
    SceneSample s = gen_scene(64, 2);
    Tensor edited = s.video;
    int F = s.masks.shape[0], N = s.masks.shape[1], H = s.masks.shape[2],
        W = s.masks.shape[3];
    Rng rng = rng_stream(8);
    for (int f = 0; f < F; ++f)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double covered = 0;
                for (int n = 0; n < N; ++n)
                    covered += s.masks[((f * N + n) * H + y) * W + x];
                if (covered == 0) {
                    int64_t p = ((f * H + y) * W + x) * 3;
                    for (int c = 0; c < 3; ++c) edited[p + c] = rng.uniform();
                }
            }
    FaceSimResult a = facesim_analogue(s.video, s.references, s.masks);
    FaceSimResult b = facesim_analogue(edited, s.references, s.masks);
    for (size_t i = 0; i < a.per_subject.size(); ++i)
        CHECK(a.per_subject[i] == doctest::Approx(b.per_subject[i]).epsilon(1e-12));
}

TEST_CASE("global prompt alignment prefers matched pairs") {
    double matched = 0, crossed = 0;
    const int trials = 200;
    for (int i = 0; i < trials; ++i) {
        SceneSample a = gen_scene(1000 + static_cast<uint64_t>(i), 2);
        SceneSample b = gen_scene(5000 + static_cast<uint64_t>(i), 2);
        matched += gme_analogue(a.video, a.prompt_code);
        crossed += gme_analogue(a.video, b.prompt_code);
    }
    CHECK(matched / trials > crossed / trials);

    SceneSample s = gen_scene(3, 1);
    double g = gme_analogue(s.video, s.prompt_code);
    CHECK(g <= 1.0 + 1e-12);
    CHECK(g >= -1.0 - 1e-12);
}

TEST_CASE("composite score normalization") {
    SUBCASE("constant columns collapse to one half") {
        std::vector<std::vector<double>> rows = {{0.3, 0.7}, {0.3, 0.7}};
        auto totals = total_eval_score(rows, {0.5, 0.5});
        CHECK(totals[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(totals[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("single metric preserves rank order") {
        std::vector<std::vector<double>> rows = {{0.2}, {0.9}, {0.5}};
        auto totals = total_eval_score(rows, {1.0});
        CHECK(totals[1] > totals[2]);
        CHECK(totals[2] > totals[0]);
    }
    SUBCASE("hand-built 2x2 table") {
        // col 0 spans [0,1]; col 1 spans [2,4]
        std::vector<std::vector<double>> rows = {{0.0, 4.0}, {1.0, 2.0}};
        auto totals = total_eval_score(rows, {0.5, 0.5});
        CHECK(totals[0] == doctest::Approx(0.5 * 0.0 + 0.5 * 1.0).epsilon(1e-12));
        CHECK(totals[1] == doctest::Approx(0.5 * 1.0 + 0.5 * 0.0).epsilon(1e-12));
    }
}

TEST_CASE("report CSV layout") {
    EvalReport rep;
    EvalRow r;
    r.sample_id = 0;
    r.facesim_mean = 0.9;
    r.facesim_min = 0.8;
    r.nexus = 0.7;
    r.gme = 0.6;
    r.natural = 0.95;
    r.aesthetic = 0.4;
    rep.rows.push_back(r);
    r.sample_id = 1;
    r.facesim_mean = 0.5;
    rep.rows.push_back(r);
    rep.finalize_totals();
    std::string csv = rep.to_csv();
    CHECK(csv.rfind("sample_id,facesim_mean,facesim_min,nexus,gme,natural,aesthetic,total",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3); // header + 2 rows
}

TEST_CASE("ground-truth evaluation scores near one on identity") {
    std::vector<SceneSample> scenes;
    for (uint64_t i = 0; i < 4; ++i) scenes.push_back(gen_scene(70 + i, 2));
    EvalReport rep = evaluate_ground_truth(scenes);
    REQUIRE(rep.rows.size() == 4);
    CHECK(rep.aggregate.facesim_mean >= 0.999);
    CHECK(rep.aggregate.nexus >= 0.99);
}
