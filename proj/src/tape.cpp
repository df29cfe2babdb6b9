#include "idcr/tape.hpp"

#include <cmath>
#include <cstring>

#include "idcr/kernels.hpp"

namespace idcr {

namespace {
constexpr double kRmsEps = 1e-6;
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
} // namespace

Var Tape::alloc(std::vector<int> in, std::vector<int> shape) {
    Node n;
    n.in = std::move(in);
    n.val = Tensor(std::move(shape));
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const double* g, int64_t n) {
    Tensor& dst = node(id).grad;
    for (int64_t i = 0; i < n; ++i) dst.data[static_cast<size_t>(i)] += g[i];
}

Var Tape::leaf(Tensor t) {
    for (double v : t.data)
        if (!std::isfinite(v)) throw numeric_error("non-finite value in leaf tensor");
    Node n;
    n.val = std::move(t);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

// ---------------------------------------------------------------- elementwise

Var Tape::add_scaled(Var a, double ca, Var b, double cb) {
    require_same_shape(val(a), val(b), "add_scaled");
    Var out = alloc({a.id, b.id}, val(a).shape);
    auto fwd = [ca, cb](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        const auto& B = T.node(n.in[1]).val.data;
        for (size_t i = 0; i < A.size(); ++i) n.val.data[i] = ca * A[i] + cb * B[i];
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [ca, cb](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& G = n.grad.data;
        auto& ga = T.node(n.in[0]).grad.data;
        auto& gb = T.node(n.in[1]).grad.data;
        for (size_t i = 0; i < G.size(); ++i) {
            ga[i] += ca * G[i];
            gb[i] += cb * G[i];
        }
    };
    return out;
}

Var Tape::add(Var a, Var b) { return add_scaled(a, 1.0, b, 1.0); }
Var Tape::sub(Var a, Var b) { return add_scaled(a, 1.0, b, -1.0); }

Var Tape::mul(Var a, Var b) {
    require_same_shape(val(a), val(b), "mul");
    Var out = alloc({a.id, b.id}, val(a).shape);
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        const auto& B = T.node(n.in[1]).val.data;
        for (size_t i = 0; i < A.size(); ++i) n.val.data[i] = A[i] * B[i];
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& G = n.grad.data;
        const auto& A = T.node(n.in[0]).val.data;
        const auto& B = T.node(n.in[1]).val.data;
        auto& ga = T.node(n.in[0]).grad.data;
        auto& gb = T.node(n.in[1]).grad.data;
        for (size_t i = 0; i < G.size(); ++i) {
            ga[i] += G[i] * B[i];
            gb[i] += G[i] * A[i];
        }
    };
    return out;
}

Var Tape::scale(Var a, double c) {
    Var out = alloc({a.id}, val(a).shape);
    auto fwd = [c](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        for (size_t i = 0; i < A.size(); ++i) n.val.data[i] = c * A[i];
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [c](Tape& T, int id) {
        Node& n = T.node(id);
        auto& ga = T.node(n.in[0]).grad.data;
        for (size_t i = 0; i < n.grad.data.size(); ++i) ga[i] += c * n.grad.data[i];
    };
    return out;
}

Var Tape::add_scalar(Var a, double c) {
    Var out = alloc({a.id}, val(a).shape);
    auto fwd = [c](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        for (size_t i = 0; i < A.size(); ++i) n.val.data[i] = A[i] + c;
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        auto& ga = T.node(n.in[0]).grad.data;
        for (size_t i = 0; i < n.grad.data.size(); ++i) ga[i] += n.grad.data[i];
    };
    return out;
}

Var Tape::sigmoid(Var a) {
    Var out = alloc({a.id}, val(a).shape);
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        for (size_t i = 0; i < A.size(); ++i) n.val.data[i] = 1.0 / (1.0 + std::exp(-A[i]));
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        auto& ga = T.node(n.in[0]).grad.data;
        for (size_t i = 0; i < n.grad.data.size(); ++i) {
            double s = n.val.data[i];
            ga[i] += n.grad.data[i] * s * (1.0 - s);
        }
    };
    return out;
}

Var Tape::gelu(Var a) {
    Var out = alloc({a.id}, val(a).shape);
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        for (size_t i = 0; i < A.size(); ++i) {
            double x = A[i];
            n.val.data[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
        }
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        auto& ga = T.node(n.in[0]).grad.data;
        for (size_t i = 0; i < n.grad.data.size(); ++i) {
            double x = A[i];
            double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            ga[i] += n.grad.data[i] * (cdf + x * pdf);
        }
    };
    return out;
}

Var Tape::vexp(Var a) {
    Var out = alloc({a.id}, val(a).shape);
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        for (size_t i = 0; i < A.size(); ++i) n.val.data[i] = std::exp(A[i]);
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        auto& ga = T.node(n.in[0]).grad.data;
        for (size_t i = 0; i < n.grad.data.size(); ++i)
            ga[i] += n.grad.data[i] * n.val.data[i];
    };
    return out;
}

Var Tape::vlog(Var a) {
    for (double v : val(a).data)
        if (v <= 0.0) throw domain_error("vlog: inputs must be positive");
    Var out = alloc({a.id}, val(a).shape);
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        for (size_t i = 0; i < A.size(); ++i) n.val.data[i] = std::log(A[i]);
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        auto& ga = T.node(n.in[0]).grad.data;
        for (size_t i = 0; i < n.grad.data.size(); ++i) ga[i] += n.grad.data[i] / A[i];
    };
    return out;
}

// ------------------------------------------------------------- linear algebra

static void require_2d(const Tensor& t, const char* op) {
    if (t.shape.size() != 2)
        throw shape_error(std::string(op) + ": expected 2-D tensor, got " + t.shape_str());
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require_2d(A, "matmul");
    require_2d(B, "matmul");
    if (A.shape[1] != B.shape[0])
        throw shape_error("matmul: inner dimensions disagree, " + A.shape_str() + " x " +
                          B.shape_str());
    Var out = alloc({a.id, b.id}, {A.shape[0], B.shape[1]});
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& A = T.node(n.in[0]).val;
        const Tensor& B = T.node(n.in[1]).val;
        kernels::matmul(A.data.data(), B.data.data(), n.val.data.data(), A.shape[0],
                        A.shape[1], B.shape[1]);
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& A = T.node(n.in[0]).val;
        const Tensor& B = T.node(n.in[1]).val;
        Tensor& ga = T.node(n.in[0]).grad;
        Tensor& gb = T.node(n.in[1]).grad;
        // dA += G * B^T ; dB += A^T * G
        kernels::matmul_nt_acc(n.grad.data.data(), B.data.data(), ga.data.data(), A.shape[0],
                               B.shape[1], A.shape[1]);
        kernels::matmul_tn_acc(A.data.data(), n.grad.data.data(), gb.data.data(), A.shape[1],
                               A.shape[0], B.shape[1]);
    };
    return out;
}

Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require_2d(A, "matmul_nt");
    require_2d(B, "matmul_nt");
    if (A.shape[1] != B.shape[1])
        throw shape_error("matmul_nt: inner dimensions disagree, " + A.shape_str() + " x " +
                          B.shape_str() + "^T");
    Var out = alloc({a.id, b.id}, {A.shape[0], B.shape[0]});
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& A = T.node(n.in[0]).val;
        const Tensor& B = T.node(n.in[1]).val;
        kernels::matmul_nt(A.data.data(), B.data.data(), n.val.data.data(), A.shape[0],
                           A.shape[1], B.shape[0]);
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& A = T.node(n.in[0]).val;
        const Tensor& B = T.node(n.in[1]).val;
        Tensor& ga = T.node(n.in[0]).grad;
        Tensor& gb = T.node(n.in[1]).grad;
        // C = A B^T: dA += G * B ; dB += G^T * A
        kernels::matmul_acc(n.grad.data.data(), B.data.data(), ga.data.data(), A.shape[0],
                            B.shape[0], A.shape[1]);
        kernels::matmul_tn_acc(n.grad.data.data(), A.data.data(), gb.data.data(), B.shape[0],
                               A.shape[0], A.shape[1]);
    };
    return out;
}

Var Tape::matmul_tn(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require_2d(A, "matmul_tn");
    require_2d(B, "matmul_tn");
    if (A.shape[0] != B.shape[0])
        throw shape_error("matmul_tn: inner dimensions disagree, " + A.shape_str() + "^T x " +
                          B.shape_str());
    Var out = alloc({a.id, b.id}, {A.shape[1], B.shape[1]});
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& A = T.node(n.in[0]).val;
        const Tensor& B = T.node(n.in[1]).val;
        kernels::matmul_tn(A.data.data(), B.data.data(), n.val.data.data(), A.shape[1],
                           A.shape[0], B.shape[1]);
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& A = T.node(n.in[0]).val;
        const Tensor& B = T.node(n.in[1]).val;
        Tensor& ga = T.node(n.in[0]).grad;
        Tensor& gb = T.node(n.in[1]).grad;
        // C = A^T B: dA += B * G^T ; dB += A * G
        kernels::matmul_nt_acc(B.data.data(), n.grad.data.data(), ga.data.data(), A.shape[0],
                               B.shape[1], A.shape[1]);
        kernels::matmul_acc(A.data.data(), n.grad.data.data(), gb.data.data(), A.shape[0],
                            A.shape[1], B.shape[1]);
    };
    return out;
}

Var Tape::softmax_rows(Var a) {
    require_2d(val(a), "softmax_rows");
    Var out = alloc({a.id}, val(a).shape);
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& A = T.node(n.in[0]).val;
        int R = A.shape[0], C = A.shape[1];
        for (int r = 0; r < R; ++r) {
            const double* x = A.data.data() + static_cast<std::ptrdiff_t>(r) * C;
            double* y = n.val.data.data() + static_cast<std::ptrdiff_t>(r) * C;
            double mx = x[0];
            for (int j = 1; j < C; ++j) mx = std::max(mx, x[j]);
            double s = 0.0;
            for (int j = 0; j < C; ++j) {
                y[j] = std::exp(x[j] - mx);
                s += y[j];
            }
            for (int j = 0; j < C; ++j) y[j] /= s;
        }
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        int R = n.val.shape[0], C = n.val.shape[1];
        auto& ga = T.node(n.in[0]).grad.data;
        for (int r = 0; r < R; ++r) {
            const double* s = n.val.data.data() + static_cast<std::ptrdiff_t>(r) * C;
            const double* g = n.grad.data.data() + static_cast<std::ptrdiff_t>(r) * C;
            double dot = 0.0;
            for (int j = 0; j < C; ++j) dot += g[j] * s[j];
            double* d = ga.data() + static_cast<std::ptrdiff_t>(r) * C;
            for (int j = 0; j < C; ++j) d[j] += s[j] * (g[j] - dot);
        }
    };
    return out;
}

Var Tape::rms_norm(Var x, Var gain) {
    const Tensor& X = val(x);
    const Tensor& G = val(gain);
    require_2d(X, "rms_norm");
    if (static_cast<int>(G.data.size()) != X.shape[1])
        throw shape_error("rms_norm: gain length " + G.shape_str() +
                          " does not match last dimension of " + X.shape_str());
    Var out = alloc({x.id, gain.id}, X.shape);
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& X = T.node(n.in[0]).val;
        const Tensor& G = T.node(n.in[1]).val;
        int R = X.shape[0], C = X.shape[1];
        for (int r = 0; r < R; ++r) {
            const double* xi = X.data.data() + static_cast<std::ptrdiff_t>(r) * C;
            double* y = n.val.data.data() + static_cast<std::ptrdiff_t>(r) * C;
            double ms = 0.0;
            for (int j = 0; j < C; ++j) ms += xi[j] * xi[j];
            ms = ms / C + kRmsEps;
            double inv = 1.0 / std::sqrt(ms);
            for (int j = 0; j < C; ++j) y[j] = xi[j] * G.data[static_cast<size_t>(j)] * inv;
        }
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& X = T.node(n.in[0]).val;
        const Tensor& G = T.node(n.in[1]).val;
        auto& gx = T.node(n.in[0]).grad.data;
        auto& gg = T.node(n.in[1]).grad.data;
        int R = X.shape[0], C = X.shape[1];
        for (int r = 0; r < R; ++r) {
            const double* xi = X.data.data() + static_cast<std::ptrdiff_t>(r) * C;
            const double* go = n.grad.data.data() + static_cast<std::ptrdiff_t>(r) * C;
            double ms = 0.0;
            for (int j = 0; j < C; ++j) ms += xi[j] * xi[j];
            ms = ms / C + kRmsEps;
            double inv = 1.0 / std::sqrt(ms);
            double dot = 0.0; // sum_j go_j * g_j * x_j
            for (int j = 0; j < C; ++j) dot += go[j] * G.data[static_cast<size_t>(j)] * xi[j];
            double* dx = gx.data() + static_cast<std::ptrdiff_t>(r) * C;
            for (int j = 0; j < C; ++j) {
                dx[j] += go[j] * G.data[static_cast<size_t>(j)] * inv -
                         dot * inv * inv * inv * xi[j] / C;
                gg[static_cast<size_t>(j)] += go[j] * xi[j] * inv;
            }
        }
    };
    return out;
}

Var Tape::add_rowvec(Var x, Var b) {
    const Tensor& X = val(x);
    const Tensor& B = val(b);
    require_2d(X, "add_rowvec");
    if (static_cast<int>(B.data.size()) != X.shape[1])
        throw shape_error("add_rowvec: vector " + B.shape_str() + " vs " + X.shape_str());
    Var out = alloc({x.id, b.id}, X.shape);
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& X = T.node(n.in[0]).val;
        const Tensor& B = T.node(n.in[1]).val;
        int R = X.shape[0], C = X.shape[1];
        for (int r = 0; r < R; ++r)
            for (int j = 0; j < C; ++j)
                n.val.data[static_cast<size_t>(r * C + j)] =
                    X.data[static_cast<size_t>(r * C + j)] + B.data[static_cast<size_t>(j)];
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        int R = n.val.shape[0], C = n.val.shape[1];
        auto& gx = T.node(n.in[0]).grad.data;
        auto& gb = T.node(n.in[1]).grad.data;
        for (int r = 0; r < R; ++r)
            for (int j = 0; j < C; ++j) {
                double g = n.grad.data[static_cast<size_t>(r * C + j)];
                gx[static_cast<size_t>(r * C + j)] += g;
                gb[static_cast<size_t>(j)] += g;
            }
    };
    return out;
}

// ------------------------------------------------------------------ structure

Var Tape::slice_rows(Var a, int r0, int r1) {
    const Tensor& A = val(a);
    require_2d(A, "slice_rows");
    if (r0 < 0 || r1 > A.shape[0] || r0 >= r1)
        throw shape_error("slice_rows: bad range [" + std::to_string(r0) + "," +
                          std::to_string(r1) + ") for " + A.shape_str());
    Var out = alloc({a.id}, {r1 - r0, A.shape[1]});
    auto fwd = [r0, r1](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& A = T.node(n.in[0]).val;
        int C = A.shape[1];
        std::memcpy(n.val.data.data(), A.data.data() + static_cast<std::ptrdiff_t>(r0) * C,
                    sizeof(double) * static_cast<size_t>((r1 - r0) * C));
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [r0](Tape& T, int id) {
        Node& n = T.node(id);
        int C = n.val.shape[1];
        auto& ga = T.node(n.in[0]).grad.data;
        for (size_t i = 0; i < n.grad.data.size(); ++i)
            ga[static_cast<size_t>(r0 * C) + i] += n.grad.data[i];
    };
    return out;
}

Var Tape::slice_cols(Var a, int c0, int c1) {
    const Tensor& A = val(a);
    require_2d(A, "slice_cols");
    if (c0 < 0 || c1 > A.shape[1] || c0 >= c1)
        throw shape_error("slice_cols: bad range [" + std::to_string(c0) + "," +
                          std::to_string(c1) + ") for " + A.shape_str());
    Var out = alloc({a.id}, {A.shape[0], c1 - c0});
    auto fwd = [c0, c1](Tape& T, int id) {
        Node& n = T.node(id);
        const Tensor& A = T.node(n.in[0]).val;
        int R = A.shape[0], C = A.shape[1], W = c1 - c0;
        for (int r = 0; r < R; ++r)
            std::memcpy(n.val.data.data() + static_cast<std::ptrdiff_t>(r) * W,
                        A.data.data() + static_cast<std::ptrdiff_t>(r) * C + c0,
                        sizeof(double) * static_cast<size_t>(W));
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [c0](Tape& T, int id) {
        Node& n = T.node(id);
        int R = n.val.shape[0], W = n.val.shape[1];
        Tensor& ga = T.node(n.in[0]).grad;
        int C = ga.shape[1];
        for (int r = 0; r < R; ++r)
            for (int j = 0; j < W; ++j)
                ga.data[static_cast<size_t>(r * C + c0 + j)] +=
                    n.grad.data[static_cast<size_t>(r * W + j)];
    };
    return out;
}

Var Tape::concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw contract_error("concat_rows: empty part list");
    int C = val(parts[0]).shape[1];
    int R = 0;
    for (const Var& p : parts) {
        const Tensor& t = val(p);
        require_2d(t, "concat_rows");
        if (t.shape[1] != C)
            throw shape_error("concat_rows: width mismatch, " + t.shape_str() + " vs width " +
                              std::to_string(C));
        R += t.shape[0];
    }
    std::vector<int> in;
    for (const Var& p : parts) in.push_back(p.id);
    Var out = alloc(std::move(in), {R, C});
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        size_t off = 0;
        for (int src : n.in) {
            const Tensor& A = T.node(src).val;
            std::memcpy(n.val.data.data() + off, A.data.data(),
                        sizeof(double) * A.data.size());
            off += A.data.size();
        }
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        size_t off = 0;
        for (int src : n.in) {
            Tensor& g = T.node(src).grad;
            for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += n.grad.data[off + i];
            off += g.data.size();
        }
    };
    return out;
}

Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw contract_error("concat_cols: empty part list");
    int R = val(parts[0]).shape[0];
    int C = 0;
    for (const Var& p : parts) {
        const Tensor& t = val(p);
        require_2d(t, "concat_cols");
        if (t.shape[0] != R)
            throw shape_error("concat_cols: row mismatch, " + t.shape_str() + " vs rows " +
                              std::to_string(R));
        C += t.shape[1];
    }
    std::vector<int> in;
    for (const Var& p : parts) in.push_back(p.id);
    Var out = alloc(std::move(in), {R, C});
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        int R = n.val.shape[0], C = n.val.shape[1];
        int col = 0;
        for (int src : n.in) {
            const Tensor& A = T.node(src).val;
            int W = A.shape[1];
            for (int r = 0; r < R; ++r)
                std::memcpy(n.val.data.data() + static_cast<std::ptrdiff_t>(r) * C + col,
                            A.data.data() + static_cast<std::ptrdiff_t>(r) * W,
                            sizeof(double) * static_cast<size_t>(W));
            col += W;
        }
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        int R = n.val.shape[0], C = n.val.shape[1];
        int col = 0;
        for (int src : n.in) {
            Tensor& g = T.node(src).grad;
            int W = g.shape[1];
            for (int r = 0; r < R; ++r)
                for (int j = 0; j < W; ++j)
                    g.data[static_cast<size_t>(r * W + j)] +=
                        n.grad.data[static_cast<size_t>(r * C + col + j)];
            col += W;
        }
    };
    return out;
}

Var Tape::reshape(Var a, std::vector<int> shape) {
    const Tensor& A = val(a);
    if (Tensor::numel_of(shape) != A.numel())
        throw shape_error("reshape: element count mismatch, " + A.shape_str() + " -> " +
                          Tensor::shape_str(shape));
    Var out = alloc({a.id}, std::move(shape));
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        n.val.data = T.node(n.in[0]).val.data;
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        auto& ga = T.node(n.in[0]).grad.data;
        for (size_t i = 0; i < n.grad.data.size(); ++i) ga[i] += n.grad.data[i];
    };
    return out;
}

Var Tape::permute_flat(Var a, std::shared_ptr<const std::vector<int64_t>> dst,
                       std::vector<int> out_shape) {
    const Tensor& A = val(a);
    if (static_cast<int64_t>(dst->size()) != A.numel() ||
        Tensor::numel_of(out_shape) != A.numel())
        throw shape_error("permute_flat: index table size mismatch for " + A.shape_str());
    Var out = alloc({a.id}, std::move(out_shape));
    auto fwd = [dst](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        for (size_t i = 0; i < A.size(); ++i)
            n.val.data[static_cast<size_t>((*dst)[i])] = A[i];
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [dst](Tape& T, int id) {
        Node& n = T.node(id);
        auto& ga = T.node(n.in[0]).grad.data;
        for (size_t i = 0; i < ga.size(); ++i)
            ga[i] += n.grad.data[static_cast<size_t>((*dst)[i])];
    };
    return out;
}

// ----------------------------------------------------------------- reductions

Var Tape::sum(Var a) {
    Var out = alloc({a.id}, {1});
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        double s = 0.0;
        for (double v : A) s += v;
        n.val.data[0] = s;
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        auto& ga = T.node(n.in[0]).grad.data;
        double g = n.grad.data[0];
        for (auto& v : ga) v += g;
    };
    return out;
}

Var Tape::mean(Var a) {
    double inv = 1.0 / static_cast<double>(val(a).numel());
    return scale(sum(a), inv);
}

Var Tape::sumsq(Var a) {
    Var out = alloc({a.id}, {1});
    auto fwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        double s = 0.0;
        for (double v : A) s += v * v;
        n.val.data[0] = s;
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& A = T.node(n.in[0]).val.data;
        auto& ga = T.node(n.in[0]).grad.data;
        double g = n.grad.data[0];
        for (size_t i = 0; i < A.size(); ++i) ga[i] += 2.0 * A[i] * g;
    };
    return out;
}

Var Tape::gauss_logprob(Var mean, const Tensor& x, double stddev) {
    if (stddev <= 0.0) throw domain_error("gauss_logprob: std must be positive");
    require_same_shape(val(mean), x, "gauss_logprob");
    auto xs = std::make_shared<const Tensor>(x);
    Var out = alloc({mean.id}, {1});
    auto fwd = [xs, stddev](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& M = T.node(n.in[0]).val.data;
        double d2 = 0.0;
        for (size_t i = 0; i < M.size(); ++i) {
            double d = xs->data[i] - M[i];
            d2 += d * d;
        }
        double D = static_cast<double>(M.size());
        n.val.data[0] =
            -0.5 * D * std::log(kTwoPi * stddev * stddev) - d2 / (2.0 * stddev * stddev);
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [xs, stddev](Tape& T, int id) {
        Node& n = T.node(id);
        const auto& M = T.node(n.in[0]).val.data;
        auto& gm = T.node(n.in[0]).grad.data;
        double g = n.grad.data[0];
        double inv = 1.0 / (stddev * stddev);
        for (size_t i = 0; i < M.size(); ++i) gm[i] += g * (xs->data[i] - M[i]) * inv;
    };
    return out;
}

Var Tape::clipped_surrogate(Var ratio, double advantage, double clip_eps) {
    if (clip_eps <= 0.0) throw domain_error("clipped_surrogate: clip_eps must be positive");
    if (val(ratio).numel() != 1) throw contract_error("clipped_surrogate: ratio must be scalar");
    Var out = alloc({ratio.id}, {1});
    auto fwd = [advantage, clip_eps](Tape& T, int id) {
        Node& n = T.node(id);
        double r = T.node(n.in[0]).val.data[0];
        double rc = std::min(std::max(r, 1.0 - clip_eps), 1.0 + clip_eps);
        n.val.data[0] = std::min(r * advantage, rc * advantage);
    };
    fwd(*this, out.id);
    node(out.id).fwd = fwd;
    node(out.id).bwd = [advantage, clip_eps](Tape& T, int id) {
        Node& n = T.node(id);
        double r = T.node(n.in[0]).val.data[0];
        double rc = std::min(std::max(r, 1.0 - clip_eps), 1.0 + clip_eps);
        double v1 = r * advantage, v2 = rc * advantage;
        double d;
        if (v1 <= v2)
            d = advantage; // unclipped branch selected
        else
            d = (r > 1.0 - clip_eps && r < 1.0 + clip_eps) ? advantage : 0.0;
        T.node(n.in[0]).grad.data[0] += n.grad.data[0] * d;
    };
    return out;
}

// ------------------------------------------------------------------- backward

void Tape::zero_grad() {
    for (Node& n : nodes_) {
        if (n.grad.data.empty())
            n.grad = Tensor(n.val.shape);
        else
            std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
    }
}

void Tape::backward(Var loss) {
    if (!loss.valid() || loss.id >= static_cast<int>(nodes_.size()))
        throw contract_error("backward: invalid loss node");
    if (node(loss.id).val.numel() != 1)
        throw contract_error("backward: loss node must be scalar, got " +
                             node(loss.id).val.shape_str());
    zero_grad();
    node(loss.id).grad.data[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = node(id);
        if (n.bwd) n.bwd(*this, id);
    }
}

double Tape::replay_max_diff() {
    double worst = 0.0;
    for (size_t id = 0; id < nodes_.size(); ++id) {
        Node& n = nodes_[id];
        if (!n.fwd) continue;
        Tensor before = n.val;
        n.fwd(*this, static_cast<int>(id));
        for (size_t i = 0; i < before.data.size(); ++i)
            worst = std::max(worst, std::abs(before.data[i] - n.val.data[i]));
    }
    return worst;
}

} // namespace idcr
