#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "idcr/errors.hpp"

namespace idcr {

// Dense row-major 64-bit float array. Plain value type; gradient tracking
// lives in Tape (tape.hpp), which references tensors by node id.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
    }

    // Leaf construction: validates sizes and finiteness.
    static Tensor from(std::vector<int> s, std::vector<double> d) {
        if (numel_of(s) != static_cast<int64_t>(d.size()))
            throw shape_error("tensor data length " + std::to_string(d.size()) +
                              " does not match shape " + shape_str(s));
        for (double v : d)
            if (!std::isfinite(v)) throw numeric_error("non-finite value in leaf tensor");
        Tensor t;
        t.shape = std::move(s);
        t.data = std::move(d);
        return t;
    }

    static Tensor scalar(double v) { return from({1}, {v}); }

    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        for (auto& x : t.data) x = v;
        return t;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d <= 0) throw shape_error("non-positive dimension in shape " + shape_str(s));
            n *= d;
        }
        return n;
    }

    int rows() const { return shape.size() == 2 ? shape[0] : (shape.size() == 1 ? 1 : -1); }
    int cols() const {
        return shape.size() == 2 ? shape[1] : (shape.size() == 1 ? shape[0] : -1);
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }

    std::string shape_str() const { return shape_str(shape); }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw shape_error(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                          b.shape_str());
}

} // namespace idcr
