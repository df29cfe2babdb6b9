#pragma once

#include <string>

#include <json.hpp>

#include "idcr/evalbench.hpp"
#include "idcr/grpo.hpp"
#include "idcr/hia.hpp"
#include "idcr/reward.hpp"
#include "idcr/sprites.hpp"
#include "idcr/trainer.hpp"

namespace idcr {

// Single JSON run configuration with sections {data, model, flow, reward,
// grpo, eval, io}. Unknown keys are rejected; a fully resolved copy is written
// next to every command's outputs.

struct DataSection {
    int count = 200;
    uint64_t seed = 1;
    SceneDims dims;
    int ref_size = 8;
};

struct ModelSection {
    BackboneConfig backbone;
    CondConfig cond;
    uint64_t seed = 7;
};

struct GrpoSection {
    TrainConfig train;
    int steps = 300;
};

struct EvalSection {
    EvalConfig cfg;
    int num_samples = 50;
    uint64_t data_seed = 9001; // held-out scenes, disjoint from training data
};

struct IoSection {
    int threads = 0; // 0: available parallelism
    bool svg = false;
};

struct RunConfig {
    DataSection data;
    ModelSection model;
    FlowTrainConfig flow;
    RewardWeights reward;
    GrpoSection grpo;
    EvalSection eval;
    IoSection io;
};

// throws config_error on unknown keys, wrong types, or invalid values
RunConfig parse_run_config(const nlohmann::json& j);
// missing file -> config_error; "" -> all defaults
RunConfig load_run_config(const std::string& path);

nlohmann::json resolved_json(const RunConfig& c);
void write_resolved_config(const RunConfig& c, const std::string& path);

} // namespace idcr
