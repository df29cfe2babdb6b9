#include "idcr/config.hpp"

#include <fstream>
#include <set>

#include "idcr/errors.hpp"

namespace idcr {

using nlohmann::json;

namespace {

// tracks which keys a section consumed so leftovers can be rejected
class Section {
  public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object())
            throw config_error("config: section '" + name_ + "' must be an object");
    }

    template <typename T> void get(const char* key, T& out) {
        if (!j_.contains(key)) return;
        seen_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw config_error("config: bad value for '" + name_ + "." + key + "'");
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw config_error("config: unknown key '" + name_ + "." + it.key() + "'");
    }

  private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

const json& section(const json& j, const char* name, const json& fallback) {
    return j.contains(name) ? j.at(name) : fallback;
}

} // namespace

RunConfig parse_run_config(const json& j) {
    if (!j.is_object()) throw config_error("config: top level must be a JSON object");
    static const json empty = json::object();
    const std::set<std::string> known = {"data", "model", "flow", "reward",
                                         "grpo", "eval",  "io"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw config_error("config: unknown section '" + it.key() + "'");

    RunConfig c;
    {
        Section s(section(j, "data", empty), "data");
        s.get("count", c.data.count);
        s.get("seed", c.data.seed);
        s.get("frames", c.data.dims.frames);
        s.get("height", c.data.dims.height);
        s.get("width", c.data.dims.width);
        s.get("ref_size", c.data.ref_size);
        s.finish();
        if (c.data.count < 0) throw config_error("config: data.count must be >= 0");
    }
    {
        Section s(section(j, "model", empty), "model");
        s.get("depth", c.model.backbone.depth);
        s.get("hia_depth", c.model.backbone.hia_depth);
        s.get("hidden", c.model.backbone.hidden);
        s.get("heads", c.model.backbone.heads);
        s.get("patch_t", c.model.backbone.patch_t);
        s.get("patch_s", c.model.backbone.patch_s);
        s.get("stage1", c.model.backbone.stage1);
        s.get("stage2", c.model.backbone.stage2);
        s.get("stage3", c.model.backbone.stage3);
        s.get("ref_patch", c.model.cond.ref_patch);
        s.get("null_len", c.model.cond.null_len);
        s.get("seed", c.model.seed);
        s.finish();
        c.model.backbone.frames = c.data.dims.frames;
        c.model.backbone.height = c.data.dims.height;
        c.model.backbone.width = c.data.dims.width;
        c.model.cond.ref_size = c.data.ref_size;
        c.model.cond.hidden = c.model.backbone.hidden;
        c.model.backbone.validate();
    }
    {
        Section s(section(j, "flow", empty), "flow");
        s.get("steps", c.flow.steps);
        s.get("batch_size", c.flow.batch_size);
        s.get("lr", c.flow.lr);
        s.get("beta1", c.flow.beta1);
        s.get("beta2", c.flow.beta2);
        s.get("adam_eps", c.flow.adam_eps);
        s.get("max_grad_norm", c.flow.max_grad_norm);
        s.get("cond_dropout", c.flow.cond_dropout);
        s.get("seed", c.flow.seed);
        s.finish();
        if (c.flow.steps < 0) throw config_error("config: flow.steps must be >= 0");
    }
    {
        Section s(section(j, "reward", empty), "reward");
        s.get("w_fid", c.reward.w_fid);
        s.get("w_qual", c.reward.w_qual);
        s.get("alpha", c.reward.alpha);
        s.get("beta_q", c.reward.beta_q);
        s.get("gamma", c.reward.gamma);
        s.finish();
        c.reward.validate();
    }
    {
        Section s(section(j, "grpo", empty), "grpo");
        s.get("group_size", c.grpo.train.group_size);
        s.get("clip_eps", c.grpo.train.clip_eps);
        s.get("kl_coeff", c.grpo.train.kl_coeff);
        s.get("lr", c.grpo.train.lr);
        s.get("beta1", c.grpo.train.beta1);
        s.get("beta2", c.grpo.train.beta2);
        s.get("adam_eps", c.grpo.train.adam_eps);
        s.get("weight_decay", c.grpo.train.weight_decay);
        s.get("max_grad_norm", c.grpo.train.max_grad_norm);
        s.get("batch_size", c.grpo.train.batch_size);
        s.get("noise_a", c.grpo.train.noise_a);
        s.get("seed", c.grpo.train.seed);
        s.get("sample_steps", c.grpo.train.sample_steps);
        s.get("cfg_scale", c.grpo.train.cfg_scale);
        s.get("dpo_eta", c.grpo.train.dpo_eta);
        s.get("steps", c.grpo.steps);
        s.finish();
        c.grpo.train.validate();
        if (c.grpo.steps < 0) throw config_error("config: grpo.steps must be >= 0");
    }
    {
        std::string mode = "ode";
        Section s(section(j, "eval", empty), "eval");
        s.get("sample_steps", c.eval.cfg.sample_steps);
        s.get("cfg_scale", c.eval.cfg.cfg_scale);
        s.get("seed", c.eval.cfg.seed);
        s.get("mode", mode);
        s.get("num_samples", c.eval.num_samples);
        s.get("data_seed", c.eval.data_seed);
        s.finish();
        if (mode == "ode")
            c.eval.cfg.mode = SampleMode::ODE;
        else if (mode == "sde")
            c.eval.cfg.mode = SampleMode::SDE;
        else
            throw config_error("config: eval.mode must be 'ode' or 'sde'");
        if (c.eval.num_samples < 0)
            throw config_error("config: eval.num_samples must be >= 0");
    }
    {
        Section s(section(j, "io", empty), "io");
        s.get("threads", c.io.threads);
        s.get("svg", c.io.svg);
        s.finish();
        if (c.io.threads < 0) throw config_error("config: io.threads must be >= 0");
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return parse_run_config(json::object());
    std::ifstream f(path, std::ios::binary);
    if (!f) throw config_error("config: cannot open '" + path + "'");
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw config_error("config: parse failure in '" + path + "': " + e.what());
    }
    return parse_run_config(j);
}

json resolved_json(const RunConfig& c) {
    json j;
    j["data"] = {{"count", c.data.count},     {"seed", c.data.seed},
                 {"frames", c.data.dims.frames}, {"height", c.data.dims.height},
                 {"width", c.data.dims.width},   {"ref_size", c.data.ref_size}};
    j["model"] = {{"depth", c.model.backbone.depth},
                  {"hia_depth", c.model.backbone.hia_depth},
                  {"hidden", c.model.backbone.hidden},
                  {"heads", c.model.backbone.heads},
                  {"patch_t", c.model.backbone.patch_t},
                  {"patch_s", c.model.backbone.patch_s},
                  {"stage1", c.model.backbone.stage1},
                  {"stage2", c.model.backbone.stage2},
                  {"stage3", c.model.backbone.stage3},
                  {"ref_patch", c.model.cond.ref_patch},
                  {"null_len", c.model.cond.null_len},
                  {"seed", c.model.seed}};
    j["flow"] = {{"steps", c.flow.steps},
                 {"batch_size", c.flow.batch_size},
                 {"lr", c.flow.lr},
                 {"beta1", c.flow.beta1},
                 {"beta2", c.flow.beta2},
                 {"adam_eps", c.flow.adam_eps},
                 {"max_grad_norm", c.flow.max_grad_norm},
                 {"cond_dropout", c.flow.cond_dropout},
                 {"seed", c.flow.seed}};
    j["reward"] = {{"w_fid", c.reward.w_fid},
                   {"w_qual", c.reward.w_qual},
                   {"alpha", c.reward.alpha},
                   {"beta_q", c.reward.beta_q},
                   {"gamma", c.reward.gamma}};
    j["grpo"] = {{"group_size", c.grpo.train.group_size},
                 {"clip_eps", c.grpo.train.clip_eps},
                 {"kl_coeff", c.grpo.train.kl_coeff},
                 {"lr", c.grpo.train.lr},
                 {"beta1", c.grpo.train.beta1},
                 {"beta2", c.grpo.train.beta2},
                 {"adam_eps", c.grpo.train.adam_eps},
                 {"weight_decay", c.grpo.train.weight_decay},
                 {"max_grad_norm", c.grpo.train.max_grad_norm},
                 {"batch_size", c.grpo.train.batch_size},
                 {"noise_a", c.grpo.train.noise_a},
                 {"seed", c.grpo.train.seed},
                 {"sample_steps", c.grpo.train.sample_steps},
                 {"cfg_scale", c.grpo.train.cfg_scale},
                 {"dpo_eta", c.grpo.train.dpo_eta},
                 {"steps", c.grpo.steps}};
    j["eval"] = {{"sample_steps", c.eval.cfg.sample_steps},
                 {"cfg_scale", c.eval.cfg.cfg_scale},
                 {"seed", c.eval.cfg.seed},
                 {"mode", c.eval.cfg.mode == SampleMode::ODE ? "ode" : "sde"},
                 {"num_samples", c.eval.num_samples},
                 {"data_seed", c.eval.data_seed}};
    j["io"] = {{"threads", c.io.threads}, {"svg", c.io.svg}};
    return j;
}

void write_resolved_config(const RunConfig& c, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw data_error("config: cannot write '" + path + "'");
    f << resolved_json(c).dump(2) << "\n";
}

} // namespace idcr
