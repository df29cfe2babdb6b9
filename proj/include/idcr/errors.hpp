#pragma once

#include <stdexcept>
#include <string>

namespace idcr {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// dimension / layout mismatches
struct shape_error : error {
    using error::error;
};

// scalar arguments outside their domain (t, std, probabilities)
struct domain_error : error {
    using error::error;
};

// violated operation preconditions (non-scalar loss, empty list, ...)
struct contract_error : error {
    using error::error;
};

// bad configuration, unknown keys, unknown vocabulary symbols -> exit 2
struct config_error : error {
    using error::error;
};

// dataset / container problems -> exit 3
struct data_error : error {
    using error::error;
};
struct bad_magic_error : data_error {
    using data_error::data_error;
};
struct version_error : data_error {
    using data_error::data_error;
};
struct corrupt_error : data_error {
    using data_error::data_error;
};

// non-finite values where finiteness is required -> exit 4
struct numeric_error : error {
    using error::error;
};

} // namespace idcr
