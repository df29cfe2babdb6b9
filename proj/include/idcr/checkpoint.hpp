#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "idcr/tensor.hpp"

namespace idcr {

// Shared binary container: magic "IDCR", u32 LE format version, u64 LE header
// length, UTF-8 JSON header listing {name, shape, offset} per tensor, then raw
// little-endian float64 payloads. Round-trips are bit-exact.
inline constexpr uint32_t kContainerVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor t;
};

struct Container {
    std::vector<NamedTensor> tensors;
    nlohmann::json meta; // free-form header section

    const Tensor* find(const std::string& name) const;
    const Tensor& at(const std::string& name) const;
};

void save_container(const std::string& path, const Container& c);
// Throws bad_magic_error / version_error / corrupt_error on malformed input.
Container load_container(const std::string& path);

} // namespace idcr
