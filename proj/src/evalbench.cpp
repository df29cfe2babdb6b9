#include "idcr/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "idcr/errors.hpp"

namespace idcr {

namespace {

constexpr int kBins = 4;
constexpr double kBackgroundDev = 0.25;
constexpr double kMotionWeight = 0.5;

double bg_dev(const double* p) {
    double d = 0;
    for (int c = 0; c < 3; ++c) d = std::max(d, std::abs(p[c] - kBackgroundGray));
    return d;
}

int bin_of(double v) {
    return std::clamp(static_cast<int>(v * kBins), 0, kBins - 1);
}

void l2_normalize(std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    if (s > 0) {
        s = 1.0 / std::sqrt(s);
        for (double& x : v) x *= s;
    }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw shape_error("embedding dimension mismatch");
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

Embedder histogram_embedder() {
    Embedder e;
    e.name = "histogram4";
    e.embed = [](const double* rgb, const double* mask, int n_pixels) {
        std::vector<double> h(static_cast<size_t>(kBins * kBins * kBins), 0.0);
        for (int i = 0; i < n_pixels; ++i) {
            const double* p = rgb + static_cast<std::ptrdiff_t>(i) * 3;
            bool keep = mask ? mask[i] > 0.5 : bg_dev(p) > kBackgroundDev;
            if (!keep) continue;
            h[static_cast<size_t>((bin_of(p[0]) * kBins + bin_of(p[1])) * kBins +
                                  bin_of(p[2]))] += 1.0;
        }
        l2_normalize(h);
        return h;
    };
    return e;
}

Tensor subject_mask_channel(const Tensor& masks, int subject) {
    if (masks.shape.size() != 4) throw shape_error("subject_mask_channel: masks not 4-D");
    int F = masks.shape[0], N = masks.shape[1], H = masks.shape[2], W = masks.shape[3];
    if (subject < 0 || subject >= N)
        throw shape_error("subject_mask_channel: index out of range");
    Tensor out({F, H, W});
    for (int f = 0; f < F; ++f)
        std::copy_n(masks.data.begin() + (static_cast<std::ptrdiff_t>(f) * N + subject) * H * W,
                    H * W, out.data.begin() + static_cast<std::ptrdiff_t>(f) * H * W);
    return out;
}

double nexus_score(const Tensor& video, const Tensor& reference, const Tensor& subject_masks,
                   const Embedder& e) {
    if (video.shape.size() != 4 || video.shape[3] != 3)
        throw shape_error("nexus_score: video must be [F,H,W,3]");
    if (subject_masks.shape.size() != 3 || subject_masks.shape[0] != video.shape[0] ||
        subject_masks.shape[1] != video.shape[1] || subject_masks.shape[2] != video.shape[2])
        throw shape_error("nexus_score: masks " + subject_masks.shape_str() +
                          " do not align with video " + video.shape_str());
    int F = video.shape[0];
    int hw = video.shape[1] * video.shape[2];
    std::vector<double> er =
        e.embed(reference.data.data(), nullptr, static_cast<int>(reference.numel() / 3));
    double sum = 0;
    int frames = 0;
    for (int f = 0; f < F; ++f) {
        const double* m = subject_masks.data.data() + static_cast<std::ptrdiff_t>(f) * hw;
        bool any = false;
        for (int i = 0; i < hw; ++i)
            if (m[i] > 0.5) {
                any = true;
                break;
            }
        if (!any) continue;
        std::vector<double> ef =
            e.embed(video.data.data() + static_cast<std::ptrdiff_t>(f) * hw * 3, m, hw);
        sum += dot(er, ef);
        ++frames;
    }
    return frames == 0 ? 0.0 : sum / frames;
}

FaceSimResult facesim_analogue(const Tensor& video, const std::vector<Tensor>& references,
                               const Tensor& masks) {
    IdentityResult id = identity_proxy(video, references, masks);
    FaceSimResult r;
    r.per_subject = id.per_subject;
    r.mean = face_reward(id.per_subject, 0.0);
    r.min = face_reward(id.per_subject, 1.0);
    return r;
}

namespace {

// fitted centroid slope per axis, in pixels per frame
std::pair<double, double> motion_slope(const Tensor& video) {
    int F = video.shape[0], H = video.shape[1], W = video.shape[2];
    auto slope_of = [F](const std::vector<double>& c) {
        double st = 0, sc = 0, stt = 0, stc = 0;
        for (int f = 0; f < F; ++f) {
            st += f;
            sc += c[static_cast<size_t>(f)];
            stt += static_cast<double>(f) * f;
            stc += f * c[static_cast<size_t>(f)];
        }
        double det = F * stt - st * st;
        return det == 0 ? 0.0 : (F * stc - st * sc) / det;
    };
    std::vector<double> cx(static_cast<size_t>(F)), cy(static_cast<size_t>(F));
    for (int f = 0; f < F; ++f) {
        double wsum = 0, xs = 0, ys = 0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double* p = video.data.data() +
                                  (static_cast<std::ptrdiff_t>(f) * H * W + y * W + x) * 3;
                double w = bg_dev(p);
                wsum += w;
                xs += w * x;
                ys += w * y;
            }
        cx[static_cast<size_t>(f)] = wsum < 1e-9 ? (W - 1) / 2.0 : xs / wsum;
        cy[static_cast<size_t>(f)] = wsum < 1e-9 ? (H - 1) / 2.0 : ys / wsum;
    }
    return {slope_of(cx), slope_of(cy)};
}

struct ParsedCode {
    int color = 0;
    int vx = 0, vy = 0;
};

ParsedCode parse_code(const std::string& code) {
    size_t a = code.find('_');
    size_t b = code.rfind('_');
    if (a == std::string::npos || b == a)
        throw config_error("gme: malformed prompt code '" + code + "'");
    std::string color = code.substr(0, a);
    std::string motion = code.substr(b + 1);
    ParsedCode p;
    const auto& cn = color_names();
    auto ci = std::find(cn.begin(), cn.end(), color);
    if (ci == cn.end()) throw config_error("gme: unknown color '" + color + "'");
    p.color = static_cast<int>(ci - cn.begin());
    const auto& mn = motion_names();
    auto mi = std::find(mn.begin(), mn.end(), motion);
    if (mi == mn.end()) throw config_error("gme: unknown motion '" + motion + "'");
    int m = static_cast<int>(mi - mn.begin());
    p.vx = m % 3 - 1;
    p.vy = m / 3 - 1;
    return p;
}

} // namespace

double gme_analogue(const Tensor& video, const std::vector<std::string>& prompt_code) {
    if (prompt_code.empty()) throw contract_error("gme: empty prompt");
    if (video.shape.size() != 4 || video.shape[3] != 3)
        throw shape_error("gme: video must be [F,H,W,3]");
    int n = static_cast<int>(video.numel() / 3);
    // whole-video embedding: one global histogram, not a per-frame average
    Embedder e = histogram_embedder();
    std::vector<double> ev = e.embed(video.data.data(), nullptr, n);
    auto [mx, my] = motion_slope(video);
    ev.push_back(kMotionWeight * std::clamp(mx, -1.5, 1.5));
    ev.push_back(kMotionWeight * std::clamp(my, -1.5, 1.5));
    l2_normalize(ev);

    std::vector<double> ep(static_cast<size_t>(kBins * kBins * kBins), 0.0);
    double vx = 0, vy = 0;
    for (const std::string& code : prompt_code) {
        ParsedCode p = parse_code(code);
        const auto& rgb = palette()[static_cast<size_t>(p.color)];
        ep[static_cast<size_t>((bin_of(rgb[0]) * kBins + bin_of(rgb[1])) * kBins +
                               bin_of(rgb[2]))] += 1.0;
        vx += p.vx;
        vy += p.vy;
    }
    l2_normalize(ep);
    ep.push_back(kMotionWeight * vx / static_cast<double>(prompt_code.size()));
    ep.push_back(kMotionWeight * vy / static_cast<double>(prompt_code.size()));
    l2_normalize(ep);
    return dot(ev, ep);
}

std::vector<double> total_eval_score(const std::vector<std::vector<double>>& metric_rows,
                                     const std::vector<double>& weights) {
    if (metric_rows.empty()) return {};
    size_t cols = metric_rows[0].size();
    for (const auto& r : metric_rows)
        if (r.size() != cols) throw contract_error("total_eval_score: ragged metric rows");
    std::vector<double> w = weights;
    if (w.empty()) w.assign(cols, 1.0 / static_cast<double>(cols));
    if (w.size() != cols) throw contract_error("total_eval_score: weight count mismatch");
    std::vector<double> lo(cols, 1e300), hi(cols, -1e300);
    for (const auto& r : metric_rows)
        for (size_t c = 0; c < cols; ++c) {
            lo[c] = std::min(lo[c], r[c]);
            hi[c] = std::max(hi[c], r[c]);
        }
    std::vector<double> out;
    for (const auto& r : metric_rows) {
        double t = 0;
        for (size_t c = 0; c < cols; ++c) {
            double range = hi[c] - lo[c];
            double norm = range > 0 ? (r[c] - lo[c]) / range : 0.5;
            t += w[c] * norm;
        }
        out.push_back(t);
    }
    return out;
}

void EvalReport::finalize_totals(const std::vector<double>& weights) {
    std::vector<std::vector<double>> metric_rows;
    for (const EvalRow& r : rows)
        metric_rows.push_back(
            {r.facesim_mean, r.facesim_min, r.nexus, r.gme, r.natural, r.aesthetic});
    std::vector<double> totals = total_eval_score(metric_rows, weights);
    aggregate = EvalRow{};
    for (size_t i = 0; i < rows.size(); ++i) {
        rows[i].total = totals[i];
        aggregate.facesim_mean += rows[i].facesim_mean;
        aggregate.facesim_min += rows[i].facesim_min;
        aggregate.nexus += rows[i].nexus;
        aggregate.gme += rows[i].gme;
        aggregate.natural += rows[i].natural;
        aggregate.aesthetic += rows[i].aesthetic;
        aggregate.total += rows[i].total;
    }
    if (!rows.empty()) {
        double inv = 1.0 / static_cast<double>(rows.size());
        aggregate.facesim_mean *= inv;
        aggregate.facesim_min *= inv;
        aggregate.nexus *= inv;
        aggregate.gme *= inv;
        aggregate.natural *= inv;
        aggregate.aesthetic *= inv;
        aggregate.total *= inv;
    }
}

std::string EvalReport::to_csv() const {
    std::string out = "sample_id,facesim_mean,facesim_min,nexus,gme,natural,aesthetic,total\n";
    char buf[256];
    for (const EvalRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      r.sample_id, r.facesim_mean, r.facesim_min, r.nexus, r.gme, r.natural,
                      r.aesthetic, r.total);
        out += buf;
    }
    return out;
}

Tensor sample_video(const Model& m, const Cond& cond, const SamplerConfig& cfg,
                    uint64_t traj_index) {
    ContextTokens ctx = m.encode(cond);
    ContextTokens null_ctx = m.null_ctx();
    VelocityFn vc = [&](const Tensor& x, double t) { return m.velocity(x, t, ctx); };
    VelocityFn vu = [&](const Tensor& x, double t) { return m.velocity(x, t, null_ctx); };
    Trajectory traj = sample(vc, vu, m.cfg.video_shape(), cfg,
                             [](const Tensor& x) { return decode_latent(x); }, traj_index);
    return traj.video;
}

namespace {

EvalRow score_row(int id, const Tensor& video, const SceneSample& scene, const Tensor& masks) {
    Embedder e = histogram_embedder();
    EvalRow row;
    row.sample_id = id;
    FaceSimResult fs = facesim_analogue(video, scene.references, masks);
    row.facesim_mean = fs.mean;
    row.facesim_min = fs.min;
    double nexus = 0;
    for (size_t k = 0; k < scene.references.size(); ++k)
        nexus += nexus_score(video, scene.references[k],
                             subject_mask_channel(masks, static_cast<int>(k)), e);
    row.nexus = nexus / static_cast<double>(scene.references.size());
    row.gme = gme_analogue(video, scene.prompt_code);
    row.natural = natural_proxy(video);
    row.aesthetic = aesthetic_proxy(video);
    return row;
}

} // namespace

EvalReport evaluate_model(const Model& m, const std::vector<SceneSample>& scenes,
                          const EvalConfig& cfg) {
    EvalReport rep;
    for (size_t i = 0; i < scenes.size(); ++i) {
        SamplerConfig sc;
        sc.num_steps = cfg.sample_steps;
        sc.cfg_scale = cfg.cfg_scale;
        sc.mode = cfg.mode;
        sc.seed = cfg.seed;
        Tensor video = sample_video(m, scene_cond(scenes[i]), sc, i);
        Tensor masks = segment_video(video, scenes[i].references);
        rep.rows.push_back(score_row(static_cast<int>(i), video, scenes[i], masks));
    }
    rep.finalize_totals();
    return rep;
}

EvalReport evaluate_ground_truth(const std::vector<SceneSample>& scenes) {
    EvalReport rep;
    for (size_t i = 0; i < scenes.size(); ++i)
        rep.rows.push_back(score_row(static_cast<int>(i), scenes[i].video, scenes[i],
                                     scenes[i].masks));
    rep.finalize_totals();
    return rep;
}

} // namespace idcr
