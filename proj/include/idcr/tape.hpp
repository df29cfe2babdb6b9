#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "idcr/tensor.hpp"

namespace idcr {

// Handle into a Tape. Vars are only meaningful together with the tape that
// created them; a tape and its vars are confined to one logical thread.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape. Nodes are stored in creation order, which is a
// topological order by construction; backward() walks them in exact reverse.
// Every non-leaf node also records a forward closure so the whole tape can be
// replayed from its leaves (replay_max_diff).
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // leaves (validated: finite)
    Var leaf(Tensor t);
    Var leaf_scalar(double v) { return leaf(Tensor::scalar(v)); }

    const Tensor& val(Var v) const { return node(v.id).val; }
    const Tensor& grad(Var v) const { return node(v.id).grad; }

    // elementwise
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var add_scaled(Var a, double ca, Var b, double cb); // ca*a + cb*b
    Var scale(Var a, double c);
    Var add_scalar(Var a, double c);
    Var sigmoid(Var a);
    Var gelu(Var a);
    Var vexp(Var a);
    Var vlog(Var a); // elementwise log; inputs must be positive

    // linear algebra (2-D)
    Var matmul(Var a, Var b);    // [m,k]x[k,n]
    Var matmul_nt(Var a, Var b); // [m,k]x[n,k]^T -> [m,n]
    Var matmul_tn(Var a, Var b); // [k,m]^T x [k,n] -> [m,n]

    Var softmax_rows(Var a);
    Var rms_norm(Var x, Var gain); // gain: [1,c] or [c]
    Var add_rowvec(Var x, Var b);  // broadcast row vector over rows

    // structure
    Var slice_rows(Var a, int r0, int r1);
    Var slice_cols(Var a, int c0, int c1);
    Var concat_rows(std::span<const Var> parts);
    Var concat_cols(std::span<const Var> parts);
    Var reshape(Var a, std::vector<int> shape);
    // bijective element shuffle: out.data[dst[i]] = in.data[i]
    Var permute_flat(Var a, std::shared_ptr<const std::vector<int64_t>> dst,
                     std::vector<int> out_shape);

    // reductions
    Var sum(Var a);
    Var mean(Var a);
    Var sumsq(Var a);

    // log N(x; mean, std^2 I) summed over elements; x is a constant
    Var gauss_logprob(Var mean, const Tensor& x, double stddev);
    // min(r*A, clip(r,1-eps,1+eps)*A) with the PPO subgradient
    Var clipped_surrogate(Var ratio, double advantage, double clip_eps);

    // loss must be scalar; fills grads for every node, deterministically
    void backward(Var loss);
    void zero_grad();

    // recompute every non-leaf value from the leaves, return max abs deviation
    double replay_max_diff();

    size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        std::vector<int> in;
        Tensor val;
        Tensor grad;
        std::function<void(Tape&, int)> fwd; // empty for leaves
        std::function<void(Tape&, int)> bwd; // empty for leaves
    };

    std::vector<Node> nodes_;

    Node& node(int id) { return nodes_.at(static_cast<size_t>(id)); }
    const Node& node(int id) const { return nodes_.at(static_cast<size_t>(id)); }

    Var alloc(std::vector<int> in, std::vector<int> shape);
    void accumulate(int id, const double* g, int64_t n);

    friend struct TapeOps;
};

} // namespace idcr
