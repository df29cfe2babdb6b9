#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "idcr/dataset.hpp"
#include "idcr/sprites.hpp"

using namespace idcr;
namespace fs = std::filesystem;

TEST_CASE("motion naming covers the 3x3 grid") {
    CHECK(motion_names().size() == 9);
    CHECK(motion_name(0, 0) == "still");
    std::set<std::string> seen;
    for (int vy = -1; vy <= 1; ++vy)
        for (int vx = -1; vx <= 1; ++vx) seen.insert(motion_name(vx, vy));
    CHECK(seen.size() == 9);
}

TEST_CASE("vocabulary enumerates every color/shape/motion combination") {
    Vocabulary v = default_vocabulary();
    CHECK(v.size() == 8 * 3 * 9);
    SpriteSpec s;
    s.color = 2;
    s.shape = SpriteShape::Disc;
    s.vx = 1;
    s.vy = -1;
    CHECK(v.id(prompt_symbol(s)) >= 0);
}

TEST_CASE("scene generation is deterministic and uses distinct colors") {
    SceneSample a = gen_scene(1234, 3);
    SceneSample b = gen_scene(1234, 3);
    CHECK(a.video.data == b.video.data);
    CHECK(a.masks.data == b.masks.data);
    REQUIRE(a.specs.size() == 3);
    std::set<int> colors;
    for (const auto& s : a.specs) colors.insert(s.color);
    CHECK(colors.size() == 3);
    CHECK(a.prompt_code.size() == 3);
    CHECK(a.references.size() == 3);
}

TEST_CASE("single subject yields exactly one nonempty mask channel") {
    SceneSample s = gen_scene(7, 1);
    REQUIRE(s.masks.shape == std::vector<int>{8, 1, 16, 16});
    double total = 0;
    for (double m : s.masks.data) total += m;
    CHECK(total > 0);
}

TEST_CASE("all palette colors appear across seeds") {
    std::set<int> colors;
    for (uint64_t seed = 0; seed < 1000 && colors.size() < 8; ++seed)
        colors.insert(gen_scene(seed, 1).specs[0].color);
    CHECK(colors.size() == 8);
}

TEST_CASE("zero velocity renders identical frames") {
    SpriteSpec s;
    s.shape = SpriteShape::Square;
    s.color = 0;
    s.size = 3;
    s.x0 = 2;
    s.y0 = 2;
    SceneDims dims{4, 8, 8};
    RenderResult r = render_video({s}, dims);
    int64_t fstride = 8 * 8 * 3;
    for (int f = 1; f < 4; ++f)
        for (int64_t i = 0; i < fstride; ++i)
            CHECK(r.video[f * fstride + i] == r.video[i]);
}

TEST_CASE("red square rasterizes to hand-checkable pixels") {
    SpriteSpec s;
    s.shape = SpriteShape::Square;
    s.color = 0; // red
    s.size = 2;
    s.x0 = 1;
    s.y0 = 1;
    SceneDims dims{1, 4, 4};
    RenderResult r = render_video({s}, dims);
    auto px = [&](int y, int x, int c) { return r.video[(y * 4 + x) * 3 + c]; };
    const auto& red = palette()[0];
    CHECK(px(0, 0, 0) == kBackgroundGray);
    for (int y = 1; y <= 2; ++y)
        for (int x = 1; x <= 2; ++x)
            for (int c = 0; c < 3; ++c) CHECK(px(y, x, c) == red[static_cast<size_t>(c)]);
    CHECK(px(3, 3, 1) == kBackgroundGray);
}

TEST_CASE("mask union equals the non-background pixels") {
    SceneSample s = gen_scene(99, 3);
    int F = s.masks.shape[0], N = s.masks.shape[1], H = s.masks.shape[2],
        W = s.masks.shape[3];
    for (int f = 0; f < F; ++f)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double u = 0;
                for (int n = 0; n < N; ++n)
                    u += s.masks[((f * N + n) * H + y) * W + x];
                CHECK(u <= 1.0); // occlusion resolves ownership uniquely
                int64_t p = ((f * H + y) * W + x) * 3;
                bool bg = s.video[p] == kBackgroundGray &&
                          s.video[p + 1] == kBackgroundGray &&
                          s.video[p + 2] == kBackgroundGray;
                CHECK((u > 0) == !bg);
            }
}

TEST_CASE("sprites never leave the frame") {
    SpriteSpec s;
    s.size = 3;
    s.x0 = 14;
    s.y0 = 0;
    s.vx = 1;
    CHECK_THROWS_AS(render_video({s}, SceneDims{8, 16, 16}), contract_error);
}

TEST_CASE("latent codec is affine and clamps on decode") {
    SceneSample s = gen_scene(3, 2);
    Tensor z = encode_latent(s.video);
    for (size_t i = 0; i < z.data.size(); ++i)
        CHECK(z.data[i] == doctest::Approx(2 * s.video.data[i] - 1).epsilon(1e-15));
    Tensor back = decode_latent(z);
    for (size_t i = 0; i < back.data.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(s.video.data[i]).epsilon(1e-14));
    Tensor wild = Tensor::from({2}, {-3.0, 3.0});
    Tensor cl = decode_latent(wild);
    CHECK(cl[0] == 0.0);
    CHECK(cl[1] == 1.0);
}

TEST_CASE("dataset round-trips through disk") {
    std::string dir = (fs::temp_directory_path() / "idcr_ds_rt").string();
    fs::remove_all(dir);
    Dataset ds = generate_dataset(42, 5);
    write_dataset(ds, dir);
    Dataset rd = read_dataset(dir);
    REQUIRE(rd.samples.size() == ds.samples.size());
    CHECK(rd.vocab.symbols == ds.vocab.symbols);
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        CHECK(rd.samples[i].video.data == ds.samples[i].video.data);
        CHECK(rd.samples[i].masks.data == ds.samples[i].masks.data);
        CHECK(rd.samples[i].prompt_code == ds.samples[i].prompt_code);
        CHECK(rd.samples[i].seed == ds.samples[i].seed);
        REQUIRE(rd.samples[i].references.size() == ds.samples[i].references.size());
        for (size_t k = 0; k < ds.samples[i].references.size(); ++k)
            CHECK(rd.samples[i].references[k].data == ds.samples[i].references[k].data);
    }

    SUBCASE("truncated container is a typed error") {
        std::string data_path = dir + "/data.idcr";
        auto size = fs::file_size(data_path);
        fs::resize_file(data_path, size - 16);
        CHECK_THROWS_AS(read_dataset(dir), data_error);
    }
    SUBCASE("manifest count mismatch is rejected") {
        std::ifstream in(dir + "/manifest.json");
        std::string m((std::istreambuf_iterator<char>(in)), {});
        in.close();
        size_t pos = m.find("\"count\": 5");
        REQUIRE(pos != std::string::npos);
        m.replace(pos, 10, "\"count\": 6");
        std::ofstream(dir + "/manifest.json") << m;
        CHECK_THROWS_AS(read_dataset(dir), data_error);
    }
    fs::remove_all(dir);
}

TEST_CASE("generated datasets are seed-reproducible") {
    Dataset a = generate_dataset(7, 4);
    Dataset b = generate_dataset(7, 4);
    REQUIRE(a.samples.size() == 4);
    for (size_t i = 0; i < 4; ++i) CHECK(a.samples[i].video.data == b.samples[i].video.data);
    // subject counts land in [1, 3]
    for (const auto& s : a.samples) {
        CHECK(s.specs.size() >= 1);
        CHECK(s.specs.size() <= 3);
    }
}
