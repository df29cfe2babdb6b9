#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "idcr/checkpoint.hpp"
#include "idcr/config.hpp"
#include "idcr/dataset.hpp"
#include "idcr/errors.hpp"
#include "idcr/evalbench.hpp"
#include "idcr/grpo.hpp"
#include "idcr/bandit.hpp"
#include "idcr/kernels.hpp"
#include "idcr/svg.hpp"
#include "idcr/trainer.hpp"

namespace fs = std::filesystem;
using namespace idcr;

namespace {

void require_file(const std::string& path, const char* what) {
    if (!fs::exists(path))
        throw data_error(std::string(what) + " not found: '" + path + "'");
}

std::string parent_of(const std::string& path) {
    fs::path p = fs::path(path).parent_path();
    return p.empty() ? std::string(".") : p.string();
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

// append CSV rows, writing the header only when the file starts empty
class CsvAppender {
  public:
    CsvAppender(const std::string& path, const std::string& header) {
        bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
        f_.open(path, std::ios::binary | std::ios::app);
        if (!f_) throw data_error("cannot open metrics file '" + path + "'");
        if (fresh) f_ << header;
    }
    void row(const std::string& r) { f_ << r << std::flush; }

  private:
    std::ofstream f_;
};

Model init_or_load(const RunConfig& cfg, const std::string& init_path) {
    if (!init_path.empty()) {
        require_file(init_path, "checkpoint");
        return Model::load(init_path);
    }
    return Model::init(cfg.model.backbone, cfg.model.cond, default_vocabulary(),
                       cfg.model.seed);
}

std::vector<SceneSample> heldout_scenes(const RunConfig& cfg, int count) {
    return generate_dataset(cfg.eval.data_seed, count, cfg.data.dims, cfg.data.ref_size)
        .samples;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out) {
    Dataset ds =
        generate_dataset(cfg.data.seed, cfg.data.count, cfg.data.dims, cfg.data.ref_size);
    write_dataset(ds, out);
    write_resolved_config(cfg, out + "/resolved_config.json");
    std::map<size_t, int> ndist;
    for (const auto& s : ds.samples) ++ndist[s.specs.size()];
    std::cout << "wrote " << ds.samples.size() << " samples to " << out << "\n";
    for (const auto& [n, c] : ndist) std::cout << "  N=" << n << ": " << c << "\n";
    return 0;
}

int cmd_train_flow(const RunConfig& cfg, const std::string& data, const std::string& init,
                   const std::string& out) {
    Dataset ds = read_dataset(data);
    Model m = init_or_load(cfg, init);
    ensure_dir(parent_of(out));
    write_resolved_config(cfg, parent_of(out) + "/resolved_config.json");
    CsvAppender csv(parent_of(out) + "/flow_metrics.csv", "step,rf_loss\n");
    AdamW opt(cfg.flow.lr, cfg.flow.beta1, cfg.flow.beta2, cfg.flow.adam_eps);
    train_flow(m, ds, cfg.flow, opt, [&](const FlowStepMetrics& fm) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%lld,%.10g\n", static_cast<long long>(fm.step),
                      fm.loss);
        csv.row(buf);
    });
    m.save(out);
    std::cout << "trained " << cfg.flow.steps << " steps, checkpoint " << out << "\n";
    return 0;
}

int cmd_post_train_grpo(const RunConfig& cfg, const std::string& data,
                        const std::string& init, const std::string& ref_path,
                        const std::string& out) {
    cfg.grpo.train.validate();
    require_file(init, "init checkpoint");
    if (!ref_path.empty()) require_file(ref_path, "ref checkpoint");
    Dataset ds = read_dataset(data);
    if (ds.samples.empty()) throw data_error("post-train-grpo: dataset is empty");
    Model policy = Model::load(init);
    Model ref = Model::load(ref_path.empty() ? init : ref_path);
    ensure_dir(parent_of(out));
    write_resolved_config(cfg, parent_of(out) + "/resolved_config.json");
    CsvAppender csv(parent_of(out) + "/grpo_metrics.csv", grpo_metrics_header());
    AdamW opt(cfg.grpo.train.lr, cfg.grpo.train.beta1, cfg.grpo.train.beta2,
              cfg.grpo.train.adam_eps, cfg.grpo.train.weight_decay);
    std::vector<double> reward_curve, face_curve;
    for (int step = 0; step < cfg.grpo.steps; ++step) {
        Model snapshot = policy; // pi_old for this outer batch
        Rng pick = rng_stream(cfg.grpo.train.seed, static_cast<uint64_t>(step), 0xc0);
        std::vector<GroupRollout> groups;
        for (int b = 0; b < cfg.grpo.train.batch_size; ++b) {
            const SceneSample& scene =
                ds.samples[static_cast<size_t>(pick.uniform_int(ds.samples.size()))];
            groups.push_back(rollout_group(snapshot, scene, cfg.reward, cfg.grpo.train,
                                           static_cast<uint64_t>(step),
                                           static_cast<uint64_t>(b)));
        }
        StepMetrics mt = grpo_update(policy, ref, groups, opt, cfg.grpo.train);
        mt.step = step;
        csv.row(grpo_metrics_row(mt));
        reward_curve.push_back(mt.mean_reward);
        face_curve.push_back(mt.r_face_mean);
        if (mt.skipped) std::cout << "step " << step << ": non-finite gradient, skipped\n";
    }
    policy.save(out);
    if (cfg.io.svg && !reward_curve.empty())
        write_svg(parent_of(out) + "/grpo_reward.svg",
                  svg_line_chart("reward vs step", {{"mean_reward", reward_curve},
                                                    {"r_face_mean", face_curve}}));
    std::cout << "grpo post-training done, checkpoint " << out << "\n";
    return 0;
}

int cmd_post_train_dpo(const RunConfig& cfg, const std::string& data,
                       const std::string& init, const std::string& ref_path,
                       const std::string& out) {
    cfg.grpo.train.validate();
    require_file(init, "init checkpoint");
    if (!ref_path.empty()) require_file(ref_path, "ref checkpoint");
    Dataset ds = read_dataset(data);
    if (ds.samples.empty()) throw data_error("post-train-dpo: dataset is empty");
    Model policy = Model::load(init);
    Model ref = Model::load(ref_path.empty() ? init : ref_path);
    ensure_dir(parent_of(out));
    write_resolved_config(cfg, parent_of(out) + "/resolved_config.json");
    CsvAppender csv(parent_of(out) + "/dpo_metrics.csv", "step,loss,margin,grad_norm\n");
    // offline: all preference pairs come from the frozen reference policy
    Rng pick = rng_stream(cfg.grpo.train.seed, 0, 0xd7);
    std::vector<GroupRollout> groups;
    for (int b = 0; b < cfg.grpo.train.batch_size; ++b) {
        const SceneSample& scene =
            ds.samples[static_cast<size_t>(pick.uniform_int(ds.samples.size()))];
        groups.push_back(rollout_group(ref, scene, cfg.reward, cfg.grpo.train, 0,
                                       static_cast<uint64_t>(b)));
    }
    std::vector<PreferencePair> pairs = build_preference_pairs(groups);
    AdamW opt(cfg.grpo.train.lr, cfg.grpo.train.beta1, cfg.grpo.train.beta2,
              cfg.grpo.train.adam_eps, cfg.grpo.train.weight_decay);
    for (int step = 0; step < cfg.grpo.steps; ++step) {
        DpoMetrics mt = dpo_baseline_update(policy, ref, pairs, opt, cfg.grpo.train);
        mt.step = step;
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g,%.10g\n",
                      static_cast<long long>(mt.step), mt.loss, mt.margin, mt.grad_norm);
        csv.row(buf);
    }
    policy.save(out);
    std::cout << "dpo post-training done, checkpoint " << out << "\n";
    return 0;
}

int cmd_sample(const RunConfig& cfg, const std::string& ckpt, const std::string& data,
               const std::string& mode, const std::string& out, int count) {
    require_file(ckpt, "checkpoint");
    Dataset ds = read_dataset(data);
    Model m = Model::load(ckpt);
    SamplerConfig sc;
    sc.num_steps = cfg.eval.cfg.sample_steps;
    sc.cfg_scale = cfg.eval.cfg.cfg_scale;
    sc.seed = cfg.eval.cfg.seed;
    if (mode == "ode")
        sc.mode = SampleMode::ODE;
    else if (mode == "sde")
        sc.mode = SampleMode::SDE;
    else
        throw config_error("sample: --mode must be 'ode' or 'sde'");
    if (count <= 0) count = static_cast<int>(ds.samples.size());
    count = std::min<int>(count, static_cast<int>(ds.samples.size()));
    Container c;
    nlohmann::json prompts = nlohmann::json::array();
    for (int i = 0; i < count; ++i) {
        const SceneSample& scene = ds.samples[static_cast<size_t>(i)];
        Tensor video = sample_video(m, scene_cond(scene), sc, static_cast<uint64_t>(i));
        std::string p = "s" + std::to_string(i);
        c.tensors.push_back({p + ".video", video});
        for (size_t k = 0; k < scene.references.size(); ++k)
            c.tensors.push_back({p + ".ref" + std::to_string(k), scene.references[k]});
        prompts.push_back(scene.prompt_code);
    }
    c.meta = {{"kind", "samples"}, {"mode", mode}, {"prompts", prompts}};
    ensure_dir(parent_of(out));
    write_resolved_config(cfg, parent_of(out) + "/resolved_config.json");
    save_container(out, c);
    std::cout << "wrote " << count << " samples to " << out << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& ckpt, const std::string& data,
                 const std::string& out, bool use_gt, bool svg) {
    Dataset ds = read_dataset(data);
    std::vector<SceneSample> scenes = ds.samples;
    if (cfg.eval.num_samples > 0 &&
        scenes.size() > static_cast<size_t>(cfg.eval.num_samples))
        scenes.resize(static_cast<size_t>(cfg.eval.num_samples));
    EvalReport rep;
    if (use_gt) {
        rep = evaluate_ground_truth(scenes);
    } else {
        require_file(ckpt, "checkpoint");
        Model m = Model::load(ckpt);
        rep = evaluate_model(m, scenes, cfg.eval.cfg);
    }
    ensure_dir(parent_of(out));
    write_resolved_config(cfg, parent_of(out) + "/resolved_config.json");
    std::ofstream f(out, std::ios::binary);
    if (!f) throw data_error("evaluate: cannot write '" + out + "'");
    f << rep.to_csv();
    if (svg) {
        std::vector<double> fsm, nx;
        for (const auto& r : rep.rows) {
            fsm.push_back(r.facesim_mean);
            nx.push_back(r.nexus);
        }
        write_svg(out + ".svg", svg_line_chart("metrics per sample",
                                               {{"facesim_mean", fsm}, {"nexus", nx}}));
    }
    std::cout << "facesim_mean=" << rep.aggregate.facesim_mean
              << " nexus=" << rep.aggregate.nexus << " total=" << rep.aggregate.total
              << " (" << rep.rows.size() << " samples)\n";
    return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& suite, const std::string& ckpt,
               const std::string& out, bool svg) {
    ensure_dir(parent_of(out));
    write_resolved_config(cfg, parent_of(out) + "/resolved_config.json");
    BanditConfig bc;
    bc.group_size = cfg.grpo.train.group_size;
    bc.clip_eps = cfg.grpo.train.clip_eps;
    bc.kl_coeff = cfg.grpo.train.kl_coeff;
    bc.seed = cfg.grpo.train.seed;
    bc.steps = 150;
    std::ofstream f;
    auto open_out = [&]() -> std::ofstream& {
        f.open(out, std::ios::binary);
        if (!f) throw data_error("ablate: cannot write '" + out + "'");
        return f;
    };
    char buf[160];
    if (suite == "gamma") {
        std::vector<GammaRow> rows = gamma_sweep(bc, {0.0, 0.25, 0.5, 0.75, 1.0});
        auto& o = open_out();
        o << "gamma,avg_facesim,min_facesim,total\n";
        std::vector<double> mins;
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g\n", r.gamma,
                          r.avg_facesim, r.min_facesim, r.total);
            o << buf;
            mins.push_back(r.min_facesim);
        }
        if (svg)
            write_svg(out + ".svg",
                      svg_line_chart("min identity vs gamma", {{"min_facesim", mins}}));
    } else if (suite == "reward") {
        std::vector<RewardAblationRow> rows = reward_ablation(bc);
        auto& o = open_out();
        o << "label,facesim_final,reward_final\n";
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g\n", r.label.c_str(),
                          r.facesim_final, r.reward_final);
            o << buf;
        }
    } else if (suite == "stages") {
        require_file(ckpt, "checkpoint");
        Model m = Model::load(ckpt);
        std::vector<SceneSample> scenes =
            heldout_scenes(cfg, std::min(cfg.eval.num_samples, 8));
        auto& o = open_out();
        o << "label,facesim_mean,facesim_min,nexus,total\n";
        const std::vector<std::pair<std::string, int>> variants = {
            {"full", -1}, {"wo_stage1", 0}, {"wo_stage2", 1}, {"wo_stage3", 2}};
        for (const auto& [label, off] : variants) {
            Model v = m;
            if (off == 0) v.cfg.stage1 = false;
            if (off == 1) v.cfg.stage2 = false;
            if (off == 2) v.cfg.stage3 = false;
            EvalReport rep = evaluate_model(v, scenes, cfg.eval.cfg);
            std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g,%.10g\n", label.c_str(),
                          rep.aggregate.facesim_mean, rep.aggregate.facesim_min,
                          rep.aggregate.nexus, rep.aggregate.total);
            o << buf;
        }
    } else {
        throw config_error("ablate: --suite must be gamma, reward, or stages");
    }
    std::cout << "ablation suite '" << suite << "' written to " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sprite-scale flow matching + identity-preserving attention + GRPO lab"};
    app.require_subcommand(1);

    std::string config_path, data, init, ref, ckpt, out, mode = "ode", suite;
    int count = -1, steps = -1, threads = 0;
    bool use_gt = false, svg = false;
    uint64_t seed_flag = 0;
    bool seed_given = false;

    app.add_option("--threads", threads, "worker cap (0: available parallelism)");

    CLI::App* gen = app.add_subcommand("gen-data", "generate a sprite dataset");
    gen->add_option("--config", config_path, "JSON config");
    gen->add_option("--out", out, "output directory")->required();
    gen->add_option("--count", count, "sample count");
    gen->add_option("--seed", seed_flag, "dataset seed")->each([&](const std::string&) {
        seed_given = true;
    });

    CLI::App* tf = app.add_subcommand("train-flow", "flow-matching pretraining");
    tf->add_option("--config", config_path, "JSON config");
    tf->add_option("--data", data, "dataset directory")->required();
    tf->add_option("--init", init, "checkpoint to resume from");
    tf->add_option("--out", out, "output checkpoint")->required();
    tf->add_option("--steps", steps, "training steps");

    for (const char* name : {"post-train-grpo", "post-train-dpo"}) {
        CLI::App* c = app.add_subcommand(
            name, std::string(name) == "post-train-grpo" ? "online GRPO post-training"
                                                         : "offline DPO baseline");
        c->add_option("--config", config_path, "JSON config");
        c->add_option("--data", data, "dataset directory")->required();
        c->add_option("--init", init, "initial checkpoint")->required();
        c->add_option("--ref", ref, "reference checkpoint (default: init)");
        c->add_option("--out", out, "output checkpoint")->required();
        c->add_option("--steps", steps, "outer steps");
    }

    CLI::App* sm = app.add_subcommand("sample", "generate videos from a checkpoint");
    sm->add_option("--config", config_path, "JSON config");
    sm->add_option("--ckpt", ckpt, "checkpoint")->required();
    sm->add_option("--data", data, "dataset directory (conditions)")->required();
    sm->add_option("--mode", mode, "ode|sde");
    sm->add_option("--out", out, "output container")->required();
    sm->add_option("--count", count, "number of conditions");

    CLI::App* ev = app.add_subcommand("evaluate", "metric report over a dataset");
    ev->add_option("--config", config_path, "JSON config");
    ev->add_option("--ckpt", ckpt, "checkpoint");
    ev->add_option("--data", data, "dataset directory")->required();
    ev->add_option("--out", out, "output CSV")->required();
    ev->add_flag("--use-gt", use_gt, "score the stored ground-truth videos");
    ev->add_flag("--svg", svg, "also render SVG charts");

    CLI::App* ab = app.add_subcommand("ablate", "ablation table analogues");
    ab->add_option("--config", config_path, "JSON config");
    ab->add_option("--suite", suite, "gamma|reward|stages")->required();
    ab->add_option("--ckpt", ckpt, "checkpoint (stages suite)");
    ab->add_option("--out", out, "output CSV")->required();
    ab->add_flag("--svg", svg, "also render SVG charts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig cfg = load_run_config(config_path);
        if (threads > 0) kernels::set_num_threads(threads);
        else if (cfg.io.threads > 0) kernels::set_num_threads(cfg.io.threads);
        if (app.got_subcommand(gen)) {
            if (count >= 0) cfg.data.count = count;
            if (seed_given) cfg.data.seed = seed_flag;
            return cmd_gen_data(cfg, out);
        }
        if (app.got_subcommand(tf)) {
            if (steps >= 0) cfg.flow.steps = steps;
            return cmd_train_flow(cfg, data, init, out);
        }
        if (app.got_subcommand("post-train-grpo")) {
            if (steps >= 0) cfg.grpo.steps = steps;
            return cmd_post_train_grpo(cfg, data, init, ref, out);
        }
        if (app.got_subcommand("post-train-dpo")) {
            if (steps >= 0) cfg.grpo.steps = steps;
            return cmd_post_train_dpo(cfg, data, init, ref, out);
        }
        if (app.got_subcommand(sm)) return cmd_sample(cfg, ckpt, data, mode, out, count);
        if (app.got_subcommand(ev)) return cmd_evaluate(cfg, ckpt, data, out, use_gt, svg);
        if (app.got_subcommand(ab)) return cmd_ablate(cfg, suite, ckpt, out, svg);
        return 2;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
