#include "idcr/reward.hpp"

#include <algorithm>
#include <cmath>

#include "idcr/errors.hpp"
#include "idcr/sprites.hpp"

namespace idcr {

namespace {

constexpr int kBins = 4; // per channel; 64 total
constexpr double kBackgroundDev = 0.25;

void require_unit(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
        throw contract_error(std::string(name) + " must lie in [0,1], got " +
                             std::to_string(v));
}

int bin_of(double v) {
    int b = static_cast<int>(v * kBins);
    return std::clamp(b, 0, kBins - 1);
}

void l1_normalize(std::vector<double>& h) {
    double s = 0;
    for (double v : h) s += v;
    if (s > 0)
        for (double& v : h) v /= s;
}

double background_deviation(const double* p) {
    double d = 0;
    for (int c = 0; c < 3; ++c) d = std::max(d, std::abs(p[c] - kBackgroundGray));
    return d;
}

} // namespace

void RewardWeights::validate() const {
    auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0))
            throw config_error(std::string("reward weights: ") + name +
                               " must lie in [0,1], got " + std::to_string(v));
    };
    unit(w_fid, "w_fid");
    unit(w_qual, "w_qual");
    unit(alpha, "alpha");
    unit(beta_q, "beta_q");
    unit(gamma, "gamma");
    if (std::abs(w_fid + w_qual - 1.0) > 1e-12)
        throw config_error("reward weights: w_fid + w_qual must equal 1");
}

double face_reward(const std::vector<double>& per_subject, double gamma) {
    if (per_subject.empty()) throw contract_error("face_reward: empty score list");
    double mean = 0, mn = per_subject[0];
    for (double v : per_subject) {
        require_unit(v, "face_reward score");
        mean += v;
        mn = std::min(mn, v);
    }
    mean /= static_cast<double>(per_subject.size());
    return (1.0 - gamma) * mean + gamma * mn;
}

double fidelity_reward(double r_face, double r_subject, double alpha) {
    require_unit(r_face, "r_face");
    require_unit(r_subject, "r_subject");
    return (1.0 - alpha) * r_face + alpha * r_subject;
}

double quality_reward(double r_aes, double r_nat, double beta_q) {
    require_unit(r_aes, "r_aes");
    require_unit(r_nat, "r_nat");
    return (1.0 - beta_q) * r_aes + beta_q * r_nat;
}

double frame_average(const std::vector<double>& frame_rewards) {
    if (frame_rewards.empty()) throw contract_error("frame_average: empty list");
    double s = 0;
    for (double v : frame_rewards) s += v;
    return s / static_cast<double>(frame_rewards.size());
}

RewardBreakdown total_reward(const std::vector<double>& per_subject_id, double r_subject,
                             double r_aes, double r_nat, const RewardWeights& w) {
    w.validate();
    RewardBreakdown b;
    b.per_subject_id = per_subject_id;
    b.r_face = face_reward(per_subject_id, w.gamma);
    b.r_subject = r_subject;
    b.r_fid = fidelity_reward(b.r_face, r_subject, w.alpha);
    b.r_aes = r_aes;
    b.r_nat = r_nat;
    b.r_qual = quality_reward(r_aes, r_nat, w.beta_q);
    b.r_total = w.w_fid * b.r_fid + w.w_qual * b.r_qual;
    return b;
}

std::vector<double> color_histogram(const double* rgb, const double* mask, int n_pixels) {
    std::vector<double> h(static_cast<size_t>(kBins * kBins * kBins), 0.0);
    for (int i = 0; i < n_pixels; ++i) {
        if (mask && mask[i] <= 0.5) continue;
        const double* p = rgb + static_cast<std::ptrdiff_t>(i) * 3;
        h[static_cast<size_t>((bin_of(p[0]) * kBins + bin_of(p[1])) * kBins + bin_of(p[2]))] +=
            1.0;
    }
    l1_normalize(h);
    return h;
}

std::vector<double> reference_histogram(const Tensor& ref) {
    if (ref.shape.size() != 3 || ref.shape[2] != 3)
        throw shape_error("reference_histogram: expected [H,W,3], got " + ref.shape_str());
    int n = static_cast<int>(ref.numel() / 3);
    std::vector<double> mask(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        if (background_deviation(ref.data.data() + static_cast<std::ptrdiff_t>(i) * 3) >
            kBackgroundDev)
            mask[static_cast<size_t>(i)] = 1.0;
    return color_histogram(ref.data.data(), mask.data(), n);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw shape_error("cosine: length mismatch");
    double ab = 0, aa = 0, bb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0 || bb == 0) return 0.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

static void check_video_masks(const Tensor& video, const Tensor& masks, size_t n_refs) {
    if (video.shape.size() != 4 || video.shape[3] != 3)
        throw shape_error("identity_proxy: video must be [F,H,W,3], got " + video.shape_str());
    if (masks.shape.size() != 4 || masks.shape[0] != video.shape[0] ||
        masks.shape[2] != video.shape[1] || masks.shape[3] != video.shape[2])
        throw shape_error("identity_proxy: masks " + masks.shape_str() +
                          " do not align with video " + video.shape_str());
    if (static_cast<size_t>(masks.shape[1]) < n_refs)
        throw shape_error("identity_proxy: fewer mask channels than references");
}

IdentityResult identity_proxy(const Tensor& video, const std::vector<Tensor>& references,
                              const Tensor& masks) {
    if (references.empty()) throw contract_error("identity_proxy: no references");
    check_video_masks(video, masks, references.size());
    int F = video.shape[0], H = video.shape[1], W = video.shape[2];
    int N = masks.shape[1];
    int hw = H * W;
    IdentityResult out;
    for (size_t k = 0; k < references.size(); ++k) {
        std::vector<double> rh = reference_histogram(references[k]);
        double sum = 0;
        int frames = 0;
        for (int f = 0; f < F; ++f) {
            const double* m =
                masks.data.data() + (static_cast<std::ptrdiff_t>(f) * N + static_cast<int>(k)) * hw;
            bool any = false;
            for (int i = 0; i < hw; ++i)
                if (m[i] > 0.5) {
                    any = true;
                    break;
                }
            if (!any) continue;
            std::vector<double> vh = color_histogram(
                video.data.data() + static_cast<std::ptrdiff_t>(f) * hw * 3, m, hw);
            sum += std::max(0.0, cosine(vh, rh));
            ++frames;
        }
        if (frames == 0) {
            out.per_subject.push_back(0.0);
            out.empty_mask_warning = true;
        } else {
            out.per_subject.push_back(sum / frames);
        }
    }
    return out;
}

double subject_proxy(const Tensor& video, const std::vector<Tensor>& references,
                     const Tensor& masks) {
    if (references.empty()) throw contract_error("subject_proxy: no references");
    check_video_masks(video, masks, references.size());
    int F = video.shape[0], H = video.shape[1], W = video.shape[2];
    int N = masks.shape[1];
    int hw = H * W;
    std::vector<double> pooled_ref(static_cast<size_t>(kBins * kBins * kBins), 0.0);
    for (const Tensor& r : references) {
        std::vector<double> rh = reference_histogram(r);
        for (size_t i = 0; i < rh.size(); ++i) pooled_ref[i] += rh[i];
    }
    l1_normalize(pooled_ref);
    double sum = 0;
    int frames = 0;
    std::vector<double> un(static_cast<size_t>(hw));
    for (int f = 0; f < F; ++f) {
        bool any = false;
        for (int i = 0; i < hw; ++i) {
            double m = 0;
            for (int k = 0; k < N; ++k)
                m = std::max(m, masks.data[static_cast<size_t>(
                                    (static_cast<std::ptrdiff_t>(f) * N + k) * hw + i)]);
            un[static_cast<size_t>(i)] = m;
            any = any || m > 0.5;
        }
        if (!any) continue;
        std::vector<double> vh = color_histogram(
            video.data.data() + static_cast<std::ptrdiff_t>(f) * hw * 3, un.data(), hw);
        sum += std::max(0.0, cosine(vh, pooled_ref));
        ++frames;
    }
    return frames == 0 ? 0.0 : sum / frames;
}

double aesthetic_proxy(const Tensor& video) {
    if (video.shape.size() != 4 || video.shape[3] != 3)
        throw shape_error("aesthetic_proxy: video must be [F,H,W,3]");
    int F = video.shape[0];
    int hw = video.shape[1] * video.shape[2];
    double total = 0;
    for (int f = 0; f < F; ++f) {
        const double* p = video.data.data() + static_cast<std::ptrdiff_t>(f) * hw * 3;
        double lum_sum = 0, lum_sq = 0, sat = 0;
        for (int i = 0; i < hw; ++i) {
            const double* q = p + static_cast<std::ptrdiff_t>(i) * 3;
            double lum = (q[0] + q[1] + q[2]) / 3.0;
            lum_sum += lum;
            lum_sq += lum * lum;
            sat += std::max({q[0], q[1], q[2]}) - std::min({q[0], q[1], q[2]});
        }
        double mean = lum_sum / hw;
        double var = std::max(0.0, lum_sq / hw - mean * mean);
        total += std::clamp(2.0 * std::sqrt(var) + sat / hw, 0.0, 1.0);
    }
    return total / F;
}

double natural_proxy(const Tensor& video) {
    if (video.shape.size() != 4 || video.shape[3] != 3)
        throw shape_error("natural_proxy: video must be [F,H,W,3]");
    int F = video.shape[0], H = video.shape[1], W = video.shape[2];
    if (F < 3) return 1.0; // a line fits any 2 points exactly
    std::vector<double> cx(static_cast<size_t>(F)), cy(static_cast<size_t>(F));
    for (int f = 0; f < F; ++f) {
        double wsum = 0, xsum = 0, ysum = 0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double* p = video.data.data() +
                                  (static_cast<std::ptrdiff_t>(f) * H * W + y * W + x) * 3;
                double w = background_deviation(p);
                wsum += w;
                xsum += w * x;
                ysum += w * y;
            }
        if (wsum < 1e-9) {
            cx[static_cast<size_t>(f)] = (W - 1) / 2.0;
            cy[static_cast<size_t>(f)] = (H - 1) / 2.0;
        } else {
            cx[static_cast<size_t>(f)] = xsum / wsum;
            cy[static_cast<size_t>(f)] = ysum / wsum;
        }
    }
    // least-squares line t -> centroid; residual rms in pixels
    auto fit_residual_sq = [F](const std::vector<double>& c) {
        double st = 0, sc = 0, stt = 0, stc = 0;
        for (int f = 0; f < F; ++f) {
            st += f;
            sc += c[static_cast<size_t>(f)];
            stt += static_cast<double>(f) * f;
            stc += f * c[static_cast<size_t>(f)];
        }
        double det = F * stt - st * st;
        double slope = (F * stc - st * sc) / det;
        double inter = (sc - slope * st) / F;
        double r = 0;
        for (int f = 0; f < F; ++f) {
            double d = c[static_cast<size_t>(f)] - (inter + slope * f);
            r += d * d;
        }
        return r / F;
    };
    double rms = std::sqrt(fit_residual_sq(cx) + fit_residual_sq(cy));
    return std::clamp(1.0 - rms, 0.0, 1.0);
}

Tensor segment_video(const Tensor& video, const std::vector<Tensor>& references) {
    if (video.shape.size() != 4 || video.shape[3] != 3)
        throw shape_error("segment_video: video must be [F,H,W,3]");
    if (references.empty()) throw contract_error("segment_video: no references");
    int F = video.shape[0], H = video.shape[1], W = video.shape[2];
    int N = static_cast<int>(references.size());
    int hw = H * W;
    // mean sprite color per reference
    std::vector<std::array<double, 3>> colors;
    for (const Tensor& r : references) {
        std::array<double, 3> c = {0, 0, 0};
        double n = 0;
        int np = static_cast<int>(r.numel() / 3);
        for (int i = 0; i < np; ++i) {
            const double* p = r.data.data() + static_cast<std::ptrdiff_t>(i) * 3;
            if (background_deviation(p) > kBackgroundDev) {
                for (int ch = 0; ch < 3; ++ch) c[static_cast<size_t>(ch)] += p[ch];
                n += 1;
            }
        }
        if (n > 0)
            for (auto& v : c) v /= n;
        colors.push_back(c);
    }
    Tensor masks({F, N, H, W});
    for (int f = 0; f < F; ++f)
        for (int i = 0; i < hw; ++i) {
            const double* p =
                video.data.data() + (static_cast<std::ptrdiff_t>(f) * hw + i) * 3;
            if (background_deviation(p) <= kBackgroundDev) continue;
            int best = 0;
            double bd = 1e300;
            for (int k = 0; k < N; ++k) {
                double d = 0;
                for (int ch = 0; ch < 3; ++ch) {
                    double e = p[ch] - colors[static_cast<size_t>(k)][static_cast<size_t>(ch)];
                    d += e * e;
                }
                if (d < bd) {
                    bd = d;
                    best = k;
                }
            }
            masks.data[static_cast<size_t>((static_cast<std::ptrdiff_t>(f) * N + best) * hw +
                                           i)] = 1.0;
        }
    return masks;
}

RewardBreakdown score_video_masked(const Tensor& video, const std::vector<Tensor>& references,
                                   const Tensor& masks, const RewardWeights& w) {
    IdentityResult id = identity_proxy(video, references, masks);
    double r_sub = subject_proxy(video, references, masks);
    RewardBreakdown b =
        total_reward(id.per_subject, r_sub, aesthetic_proxy(video), natural_proxy(video), w);
    b.empty_mask_warning = id.empty_mask_warning;
    return b;
}

RewardBreakdown score_video(const Tensor& video, const std::vector<Tensor>& references,
                            const RewardWeights& w) {
    return score_video_masked(video, references, segment_video(video, references), w);
}

std::map<std::string, Scorer>& scorer_registry() {
    static std::map<std::string, Scorer> reg = {
        {"identity_mean",
         [](const Tensor& v, const std::vector<Tensor>& r, const Tensor& m) {
             IdentityResult id = identity_proxy(v, r, m);
             return face_reward(id.per_subject, 0.0);
         }},
        {"identity_min",
         [](const Tensor& v, const std::vector<Tensor>& r, const Tensor& m) {
             IdentityResult id = identity_proxy(v, r, m);
             return face_reward(id.per_subject, 1.0);
         }},
        {"subject", [](const Tensor& v, const std::vector<Tensor>& r,
                       const Tensor& m) { return subject_proxy(v, r, m); }},
        {"aesthetic", [](const Tensor& v, const std::vector<Tensor>&, const Tensor&) {
             return aesthetic_proxy(v);
         }},
        {"natural", [](const Tensor& v, const std::vector<Tensor>&, const Tensor&) {
             return natural_proxy(v);
         }}};
    return reg;
}

} // namespace idcr
