#include "idcr/trainer.hpp"

#include "idcr/errors.hpp"
#include "idcr/flow.hpp"
#include "idcr/paramref.hpp"

namespace idcr {

namespace {

struct DrawnSample {
    const SceneSample* scene;
    double t;
    Tensor z_t;
    Tensor target;
    bool drop_cond;
};

DrawnSample draw(const Dataset& ds, uint64_t seed, int64_t step, int slot,
                 double cond_dropout) {
    Rng rng = rng_stream(seed, static_cast<uint64_t>(step), static_cast<uint64_t>(slot));
    const SceneSample& s =
        ds.samples[static_cast<size_t>(rng.uniform_int(ds.samples.size()))];
    DrawnSample d;
    d.scene = &s;
    d.t = rng.uniform();
    Tensor z0 = encode_latent(s.video);
    Tensor eps(z0.shape);
    for (auto& v : eps.data) v = rng.normal();
    d.z_t = interpolate(z0, eps, d.t);
    d.target = velocity_target(z0, eps);
    d.drop_cond = rng.uniform() < cond_dropout;
    return d;
}

} // namespace

void train_flow(Model& m, const Dataset& ds, const FlowTrainConfig& cfg, AdamW& opt,
                const std::function<void(const FlowStepMetrics&)>& on_step) {
    if (ds.samples.empty()) throw data_error("train_flow: dataset is empty");
    if (cfg.batch_size < 1) throw config_error("train_flow: batch_size must be >= 1");
    auto params = m.param_list();

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<Tensor> grads;
        for (const auto& [name, p] : params) grads.emplace_back(p->shape);
        double loss_sum = 0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            DrawnSample d = draw(ds, cfg.seed, m.train_step, b, cfg.cond_dropout);
            Tape t;
            ParamRef P(t);
            ContextVars ctx =
                d.drop_cond
                    ? null_context_t(t, P, m.params.cond)
                    : encode_context_t(t, P, m.cond_cfg, m.params.cond, m.vocab,
                                       scene_cond(*d.scene));
            Var pred = predict_velocity_t(t, P, m.cfg, m.params, d.z_t, d.t, ctx);
            Var diff = t.sub(pred, t.leaf(d.target));
            Var loss = t.scale(t.sumsq(diff),
                               1.0 / static_cast<double>(d.target.numel()));
            Var scaled = t.scale(loss, 1.0 / cfg.batch_size);
            t.backward(scaled);
            loss_sum += t.val(loss).data[0];
            for (size_t pi = 0; pi < params.size(); ++pi) {
                Tensor gp = P.grad_of(*params[pi].second);
                for (size_t j = 0; j < gp.data.size(); ++j)
                    grads[pi].data[j] += gp.data[j];
            }
        }
        FlowStepMetrics fm;
        fm.step = m.train_step;
        fm.loss = loss_sum / cfg.batch_size;
        bool finite = true;
        for (const Tensor& g : grads)
            if (!g.all_finite()) finite = false;
        if (finite) {
            fm.grad_norm = grad_clip(grads, cfg.max_grad_norm);
            opt.step(params, grads);
        }
        m.train_step += 1;
        if (on_step) on_step(fm);
    }
}

double probe_flow_loss(const Model& m, const Dataset& ds, int batch, uint64_t seed) {
    if (ds.samples.empty()) throw data_error("probe_flow_loss: dataset is empty");
    double total = 0;
    for (int b = 0; b < batch; ++b) {
        DrawnSample d = draw(ds, seed, /*step=*/0x7fff0000, b, /*cond_dropout=*/0.0);
        ContextTokens ctx = m.encode(scene_cond(*d.scene));
        Tensor pred = m.velocity(d.z_t, d.t, ctx);
        double acc = 0;
        for (size_t i = 0; i < pred.data.size(); ++i) {
            double r = pred.data[i] - d.target.data[i];
            acc += r * r;
        }
        total += acc / static_cast<double>(pred.numel());
    }
    return total / batch;
}

} // namespace idcr
