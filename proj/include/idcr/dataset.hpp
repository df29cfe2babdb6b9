#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idcr/sprites.hpp"

namespace idcr {

// On-disk dataset: <dir>/manifest.json (version, vocabulary, dims, per-sample
// seeds and prompt codes) plus <dir>/data.idcr holding every tensor.

inline constexpr int kDatasetVersion = 1;

struct Dataset {
    SceneDims dims;
    int ref_size = 8;
    Vocabulary vocab;
    std::vector<SceneSample> samples;
};

Dataset generate_dataset(uint64_t seed, int count, const SceneDims& dims = {},
                         int ref_size = 8);

void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset(const std::string& dir);

} // namespace idcr
