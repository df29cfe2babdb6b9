#include "idcr/sprites.hpp"

#include <algorithm>
#include <cmath>

#include "idcr/errors.hpp"
#include "idcr/rng.hpp"

namespace idcr {

const std::array<std::array<double, 3>, 8>& palette() {
    static const std::array<std::array<double, 3>, 8> p = {{{1.0, 0.0, 0.0},
                                                            {0.0, 1.0, 0.0},
                                                            {0.0, 0.0, 1.0},
                                                            {1.0, 1.0, 0.0},
                                                            {1.0, 0.0, 1.0},
                                                            {0.0, 1.0, 1.0},
                                                            {1.0, 0.5, 0.0},
                                                            {1.0, 1.0, 1.0}}};
    return p;
}

const std::vector<std::string>& color_names() {
    static const std::vector<std::string> n = {"red",     "green", "blue",   "yellow",
                                               "magenta", "cyan",  "orange", "white"};
    return n;
}

const std::vector<std::string>& shape_names() {
    static const std::vector<std::string> n = {"square", "disc", "triangle"};
    return n;
}

const std::vector<std::string>& motion_names() {
    static const std::vector<std::string> n = {"nw", "n", "ne", "w", "still",
                                               "e",  "sw", "s", "se"};
    return n;
}

std::string motion_name(int vx, int vy) {
    if (vx < -1 || vx > 1 || vy < -1 || vy > 1)
        throw contract_error("motion_name: velocity components must lie in {-1,0,1}");
    return motion_names()[static_cast<size_t>((vy + 1) * 3 + (vx + 1))];
}

Vocabulary default_vocabulary() {
    std::vector<std::string> syms;
    for (const auto& c : color_names())
        for (const auto& s : shape_names())
            for (const auto& m : motion_names()) syms.push_back(c + "_" + s + "_" + m);
    return Vocabulary::from(std::move(syms));
}

std::string prompt_symbol(const SpriteSpec& s) {
    return color_names()[static_cast<size_t>(s.color)] + "_" +
           shape_names()[static_cast<size_t>(s.shape)] + "_" + motion_name(s.vx, s.vy);
}

bool shape_covers(SpriteShape shape, int size, int px, int py) {
    if (px < 0 || py < 0 || px >= size || py >= size) return false;
    switch (shape) {
        case SpriteShape::Square:
            return true;
        case SpriteShape::Disc: {
            double c = size / 2.0;
            double dx = px + 0.5 - c, dy = py + 0.5 - c;
            return dx * dx + dy * dy <= c * c;
        }
        case SpriteShape::Triangle: {
            // upward-pointing: row py admits pixels within py/2 + 1/4 of center
            double mid = (size - 1) / 2.0;
            return std::abs(px - mid) <= py / 2.0 + 0.25;
        }
    }
    return false;
}

static void paint(Tensor& img, int H, int W, int y, int x, const std::array<double, 3>& rgb) {
    size_t base = static_cast<size_t>((y * W + x) * 3);
    img.data[base] = rgb[0];
    img.data[base + 1] = rgb[1];
    img.data[base + 2] = rgb[2];
}

Tensor render_reference(const SpriteSpec& s, int ref_size) {
    if (s.size > ref_size)
        throw contract_error("render_reference: sprite size exceeds reference image");
    Tensor img = Tensor::full({ref_size, ref_size, 3}, kBackgroundGray);
    int off = (ref_size - s.size) / 2;
    const auto& rgb = palette()[static_cast<size_t>(s.color)];
    for (int py = 0; py < s.size; ++py)
        for (int px = 0; px < s.size; ++px)
            if (shape_covers(s.shape, s.size, px, py))
                paint(img, ref_size, ref_size, off + py, off + px, rgb);
    return img;
}

RenderResult render_video(const std::vector<SpriteSpec>& specs, const SceneDims& dims) {
    int F = dims.frames, H = dims.height, W = dims.width;
    int N = static_cast<int>(specs.size());
    for (const auto& s : specs) {
        for (int f = 0; f < F; ++f) {
            int x = s.x0 + s.vx * f, y = s.y0 + s.vy * f;
            if (x < 0 || y < 0 || x + s.size > W || y + s.size > H)
                throw contract_error("render_video: sprite leaves the frame at frame " +
                                     std::to_string(f));
        }
    }
    RenderResult r;
    r.video = Tensor::full({F, H, W, 3}, kBackgroundGray);
    r.masks = Tensor({F, std::max(N, 1), H, W});
    if (N == 0) return r;
    for (int f = 0; f < F; ++f) {
        Tensor frame = Tensor::full({H, W, 3}, kBackgroundGray);
        std::vector<int> owner(static_cast<size_t>(H * W), -1);
        for (int k = 0; k < N; ++k) {
            const SpriteSpec& s = specs[static_cast<size_t>(k)];
            int x = s.x0 + s.vx * f, y = s.y0 + s.vy * f;
            const auto& rgb = palette()[static_cast<size_t>(s.color)];
            for (int py = 0; py < s.size; ++py)
                for (int px = 0; px < s.size; ++px)
                    if (shape_covers(s.shape, s.size, px, py)) {
                        paint(frame, H, W, y + py, x + px, rgb);
                        owner[static_cast<size_t>((y + py) * W + x + px)] = k;
                    }
        }
        std::copy(frame.data.begin(), frame.data.end(),
                  r.video.data.begin() + static_cast<std::ptrdiff_t>(f) * H * W * 3);
        for (int p = 0; p < H * W; ++p)
            if (owner[static_cast<size_t>(p)] >= 0)
                r.masks.data[static_cast<size_t>(((f * N) + owner[static_cast<size_t>(p)]) * H * W +
                                                 p)] = 1.0;
    }
    return r;
}

SceneSample gen_scene(uint64_t seed, int n_subjects, const SceneDims& dims, int ref_size) {
    if (n_subjects < 1 || n_subjects > 3)
        throw contract_error("gen_scene: n_subjects must lie in [1, 3]");
    Rng rng = rng_stream(seed, 0x5c);
    SceneSample out;
    out.seed = seed;

    // distinct colors so identity proxies stay separable
    std::vector<int> colors(palette().size());
    for (size_t i = 0; i < colors.size(); ++i) colors[i] = static_cast<int>(i);
    for (size_t i = colors.size(); i > 1; --i)
        std::swap(colors[i - 1], colors[rng.uniform_int(i)]);

    for (int k = 0; k < n_subjects; ++k) {
        SpriteSpec s;
        s.shape = static_cast<SpriteShape>(rng.uniform_int(3));
        s.color = colors[static_cast<size_t>(k)];
        s.size = 3 + static_cast<int>(rng.uniform_int(3)); // 3..5
        s.vx = static_cast<int>(rng.uniform_int(3)) - 1;
        s.vy = static_cast<int>(rng.uniform_int(3)) - 1;
        int span = dims.frames - 1;
        int lox = std::max(0, -s.vx * span);
        int hix = std::min(dims.width - s.size, dims.width - s.size - s.vx * span);
        int loy = std::max(0, -s.vy * span);
        int hiy = std::min(dims.height - s.size, dims.height - s.size - s.vy * span);
        s.x0 = lox + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(hix - lox + 1)));
        s.y0 = loy + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(hiy - loy + 1)));
        out.specs.push_back(s);
        out.references.push_back(render_reference(s, ref_size));
        out.prompt_code.push_back(prompt_symbol(s));
    }
    RenderResult r = render_video(out.specs, dims);
    out.video = std::move(r.video);
    out.masks = std::move(r.masks);
    return out;
}

Tensor encode_latent(const Tensor& video) {
    Tensor out = video;
    for (auto& v : out.data) v = 2.0 * v - 1.0;
    return out;
}

Tensor decode_latent(const Tensor& latent) {
    Tensor out = latent;
    for (auto& v : out.data) v = std::clamp((v + 1.0) / 2.0, 0.0, 1.0);
    return out;
}

Cond scene_cond(const SceneSample& s) {
    Cond c;
    c.prompt = s.prompt_code;
    c.refs = s.references;
    return c;
}

} // namespace idcr
