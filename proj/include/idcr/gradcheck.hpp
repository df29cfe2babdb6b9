#pragma once

#include <functional>
#include <vector>

#include "idcr/tape.hpp"

namespace idcr {

// Builds a scalar loss from parameter vars on the given tape.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Central-difference oracle: compares analytic gradients of f against
// (f(p+h)-f(p-h))/(2h) per parameter element and returns the max of
// |analytic - numeric| / (|analytic| + 1e-8).
inline double finite_diff_check(const LossBuilder& f, const std::vector<Tensor>& params,
                                double h) {
    if (h <= 0.0) throw domain_error("finite_diff_check: h must be positive");

    auto eval = [&](const std::vector<Tensor>& p) {
        Tape tape;
        std::vector<Var> vars;
        vars.reserve(p.size());
        for (const Tensor& t : p) vars.push_back(tape.leaf(t));
        Var loss = f(tape, vars);
        return tape.val(loss).data[0];
    };

    // analytic gradients
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : params) vars.push_back(tape.leaf(t));
    Var loss = f(tape, vars);
    tape.backward(loss);

    double worst = 0.0;
    std::vector<Tensor> p = params;
    for (size_t k = 0; k < p.size(); ++k) {
        const Tensor& g = tape.grad(vars[k]);
        for (size_t i = 0; i < p[k].data.size(); ++i) {
            double orig = p[k].data[i];
            p[k].data[i] = orig + h;
            double fp = eval(p);
            p[k].data[i] = orig - h;
            double fm = eval(p);
            p[k].data[i] = orig;
            double numeric = (fp - fm) / (2.0 * h);
            double analytic = g.data[i];
            double rel = std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace idcr
