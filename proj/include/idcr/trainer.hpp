#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "idcr/dataset.hpp"
#include "idcr/grpo.hpp"
#include "idcr/hia.hpp"

namespace idcr {

// Flow-matching pretraining: regress the velocity network onto eps - z0 along
// straight interpolation paths, with condition dropout for guidance.

struct FlowTrainConfig {
    int steps = 2000;
    int batch_size = 8;
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.95;
    double adam_eps = 1e-8;
    double max_grad_norm = 1.0;
    double cond_dropout = 0.1;
    uint64_t seed = 0;
};

struct FlowStepMetrics {
    int64_t step = 0;
    double loss = 0;
    double grad_norm = 0;
};

// trains in place, continuing the model's step counter; on_step fires after
// every optimizer step (metrics streaming)
void train_flow(Model& m, const Dataset& ds, const FlowTrainConfig& cfg, AdamW& opt,
                const std::function<void(const FlowStepMetrics&)>& on_step = {});

// mean rf loss of the current model over a fixed probe batch (no updates)
double probe_flow_loss(const Model& m, const Dataset& ds, int batch, uint64_t seed);

} // namespace idcr
