#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "idcr/conditioner.hpp"
#include "idcr/tensor.hpp"

namespace idcr {

// Procedural multi-subject scenes: N colored sprites on a gray background,
// each moving with a constant integer velocity, with per-subject reference
// images, composite prompt symbols, and pixel-exact visibility masks.

inline constexpr double kBackgroundGray = 0.5;

enum class SpriteShape { Square = 0, Disc = 1, Triangle = 2 };

struct SpriteSpec {
    SpriteShape shape = SpriteShape::Square;
    int color = 0; // palette index
    int size = 3;  // bounding box in pixels
    int vx = 0, vy = 0;
    int x0 = 0, y0 = 0; // top-left at frame 0
};

struct SceneDims {
    int frames = 8, height = 16, width = 16;
};

struct SceneSample {
    std::vector<SpriteSpec> specs;
    std::vector<Tensor> references;       // N images [ref_size, ref_size, 3]
    std::vector<std::string> prompt_code; // one composite symbol per sprite
    Tensor video;                         // [f, h, w, 3]
    Tensor masks;                         // [f, N, h, w], values 0/1
    uint64_t seed = 0;
};

// 8 saturated palette colors; background gray is deliberately not in it.
const std::array<std::array<double, 3>, 8>& palette();
const std::vector<std::string>& color_names();
const std::vector<std::string>& shape_names();
const std::vector<std::string>& motion_names(); // 9 classes: vx,vy in {-1,0,1}

// name of the (vx, vy) in {-1,0,1}^2 motion class
std::string motion_name(int vx, int vy);

// full closed vocabulary: every color_shape_motion combination
Vocabulary default_vocabulary();

std::string prompt_symbol(const SpriteSpec& s);

// true if pixel (px, py) inside the size-s shape anchored at its bounding box
bool shape_covers(SpriteShape shape, int size, int px, int py);

// reference image: sprite centered on the gray background
Tensor render_reference(const SpriteSpec& s, int ref_size);

struct RenderResult {
    Tensor video; // [f, h, w, 3]
    Tensor masks; // [f, N, h, w]; later sprites occlude earlier ones
};

// throws contract_error if a sprite ever leaves the frame
RenderResult render_video(const std::vector<SpriteSpec>& specs, const SceneDims& dims);

// deterministic in seed; colors pairwise distinct within the scene
SceneSample gen_scene(uint64_t seed, int n_subjects, const SceneDims& dims = {},
                      int ref_size = 8);

// latent convention: videos live in [0,1], latents in [-1,1]
Tensor encode_latent(const Tensor& video);
Tensor decode_latent(const Tensor& latent);

// condition as the model consumes it: prompt symbols + reference images
Cond scene_cond(const SceneSample& s);

} // namespace idcr
