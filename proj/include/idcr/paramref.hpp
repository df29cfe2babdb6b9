#pragma once

#include <unordered_map>

#include "idcr/tape.hpp"

namespace idcr {

// Lazily registers parameter tensors as leaves on a tape, at most once each.
// After backward(), gradients are read back through the same mapping.
class ParamRef {
  public:
    explicit ParamRef(Tape& tape) : tape_(&tape) {}

    Var operator()(const Tensor& p) {
        auto it = cache_.find(&p);
        if (it != cache_.end()) return it->second;
        Var v = tape_->leaf(p);
        cache_.emplace(&p, v);
        return v;
    }

    // zero tensor if the parameter never participated
    Tensor grad_of(const Tensor& p) const {
        auto it = cache_.find(&p);
        if (it == cache_.end()) return Tensor(p.shape);
        return tape_->grad(it->second);
    }

    bool used(const Tensor& p) const { return cache_.count(&p) > 0; }

  private:
    Tape* tape_;
    std::unordered_map<const Tensor*, Var> cache_;
};

} // namespace idcr
