#include <doctest.h>

#include <cmath>
#include <cstring>

#include "idcr/gradcheck.hpp"
#include "idcr/kernels.hpp"
#include "idcr/rng.hpp"
#include "idcr/tape.hpp"
#include "idcr/tensor.hpp"

using namespace idcr;

TEST_CASE("tensor construction validates shape and finiteness") {
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0, 3.0}), shape_error);
    CHECK_THROWS_AS(Tensor::from({1}, {std::nan("")}), numeric_error);
    Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
}

TEST_CASE("matmul identity and hand case") {
    Tape tp;
    Var I = tp.leaf(Tensor::from({2, 2}, {1, 0, 0, 1}));
    Var A = tp.leaf(Tensor::from({2, 2}, {1, 2, 3, 4}));
    const Tensor& ia = tp.val(tp.matmul(I, A));
    for (int i = 0; i < 4; ++i) CHECK(ia[i] == tp.val(A)[i]);

    Var ones = tp.leaf(Tensor::from({2, 1}, {1, 1}));
    const Tensor& r = tp.val(tp.matmul(A, ones));
    CHECK(r[0] == 3.0);
    CHECK(r[1] == 7.0);
}

TEST_CASE("matmul gradient matches central finite differences") {
    Rng rng = rng_stream(11);
    Tensor A({3, 4}), B({4, 2});
    for (auto& x : A.data) x = rng.normal();
    for (auto& x : B.data) x = rng.normal();
    double err = finite_diff_check(
        [](Tape& t, const std::vector<Var>& p) { return t.sum(t.matmul(p[0], p[1])); },
        {A, B}, 1e-6);
    CHECK(err < 1e-6);
}

TEST_CASE("matmul serial and OpenMP variants are bit-identical") {
    const int m = 37, k = 23, n = 41;
    Rng rng = rng_stream(5);
    std::vector<double> a(m * k), b(k * n), bt(n * k), cs(m * n), cp(m * n);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) bt[i * k + j] = b[j * n + i];

    kernels::matmul_serial(a.data(), b.data(), cs.data(), m, k, n);
    kernels::matmul_omp(a.data(), b.data(), cp.data(), m, k, n);
    CHECK(std::memcmp(cs.data(), cp.data(), cs.size() * sizeof(double)) == 0);

    kernels::matmul_nt_serial(a.data(), bt.data(), cs.data(), m, k, n);
    kernels::matmul_nt_omp(a.data(), bt.data(), cp.data(), m, k, n);
    CHECK(std::memcmp(cs.data(), cp.data(), cs.size() * sizeof(double)) == 0);
}

TEST_CASE("softmax rows") {
    Tape tp;
    Var x = tp.leaf(Tensor::from({2, 2}, {0, 0, std::log(1.0), std::log(3.0)}));
    const Tensor& s = tp.val(tp.softmax_rows(x));
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s[2] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s[3] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(std::abs(s[0] + s[1] - 1.0) < 1e-12);
    CHECK(std::abs(s[2] + s[3] - 1.0) < 1e-12);
}

TEST_CASE("sigmoid") {
    Tape tp;
    Var x = tp.leaf(Tensor::from({3}, {0.0, 40.0, std::log(3.0)}));
    const Tensor& s = tp.val(tp.sigmoid(x));
    CHECK(s[0] == 0.5);
    CHECK(s[1] > 1.0 - 1e-9);
    CHECK(s[1] <= 1.0);
    CHECK(s[2] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("rms_norm") {
    Tape tp;
    Var g = tp.leaf(Tensor::from({1, 2}, {1, 1}));
    SUBCASE("all-zero input stays zero") {
        const Tensor& y = tp.val(tp.rms_norm(tp.leaf(Tensor::from({1, 2}, {0, 0})), g));
        CHECK(y[0] == 0.0);
        CHECK(y[1] == 0.0);
    }
    SUBCASE("hand case [3,4]") {
        const Tensor& y = tp.val(tp.rms_norm(tp.leaf(Tensor::from({1, 2}, {3, 4})), g));
        double d = std::sqrt(12.5 + 1e-6);
        CHECK(y[0] == doctest::Approx(3.0 / d).epsilon(1e-12));
        CHECK(y[1] == doctest::Approx(4.0 / d).epsilon(1e-12));
    }
    SUBCASE("scale invariance at c=10") {
        Tensor y1 = tp.val(tp.rms_norm(tp.leaf(Tensor::from({1, 2}, {3, 4})), g));
        Tensor y2 = tp.val(tp.rms_norm(tp.leaf(Tensor::from({1, 2}, {30, 40})), g));
        CHECK(y1[0] == doctest::Approx(y2[0]).epsilon(1e-6));
        CHECK(y1[1] == doctest::Approx(y2[1]).epsilon(1e-6));
    }
}

TEST_CASE("backward hand cases") {
    SUBCASE("sum gives all-ones gradient") {
        Tape tp;
        Var x = tp.leaf(Tensor::from({3}, {5, -2, 7}));
        tp.backward(tp.sum(x));
        for (int i = 0; i < 3; ++i) CHECK(tp.grad(x)[i] == 1.0);
    }
    SUBCASE("sum of squares at [1,2]") {
        Tape tp;
        Var x = tp.leaf(Tensor::from({2}, {1, 2}));
        tp.backward(tp.sum(tp.mul(x, x)));
        CHECK(tp.grad(x)[0] == 2.0);
        CHECK(tp.grad(x)[1] == 4.0);
    }
    SUBCASE("non-scalar loss rejected") {
        Tape tp;
        Var x = tp.leaf(Tensor::from({2}, {1, 2}));
        CHECK_THROWS_AS(tp.backward(x), contract_error);
    }
}

TEST_CASE("vexp and vlog") {
    Tape tp;
    Var x = tp.leaf(Tensor::from({2}, {0.5, 2.0}));
    const Tensor& y = tp.val(tp.vlog(tp.vexp(x)));
    CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK_THROWS_AS(tp.vlog(tp.leaf(Tensor::from({1}, {-1.0}))), domain_error);
}

TEST_CASE("finite difference oracle sanity") {
    SUBCASE("quadratic is exact to 1e-9 at h=1e-5") {
        Tensor x = Tensor::from({2}, {1.5, -0.5});
        double err = finite_diff_check(
            [](Tape& t, const std::vector<Var>& p) { return t.sum(t.mul(p[0], p[0])); },
            {x}, 1e-5);
        CHECK(err < 1e-9);
    }
    SUBCASE("constant function gives zero both ways") {
        Tensor x = Tensor::from({2}, {1.0, 2.0});
        double err = finite_diff_check(
            [](Tape& t, const std::vector<Var>& p) {
                (void)p;
                return t.leaf_scalar(3.0);
            },
            {x}, 1e-5);
        CHECK(err == 0.0);
    }
}

TEST_CASE("tape replay reproduces forward values") {
    Tape tp;
    Rng rng = rng_stream(3);
    Tensor a({4, 4}), b({4, 4});
    for (auto& x : a.data) x = rng.normal();
    for (auto& x : b.data) x = rng.normal();
    Var va = tp.leaf(a), vb = tp.leaf(b);
    Var y = tp.sum(tp.gelu(tp.matmul(va, tp.softmax_rows(vb))));
    tp.backward(y);
    CHECK(tp.replay_max_diff() == 0.0);
}

TEST_CASE("structural ops round-trip") {
    Tape tp;
    Var x = tp.leaf(Tensor::from({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8}));
    Var l = tp.slice_cols(x, 0, 2), r = tp.slice_cols(x, 2, 4);
    std::vector<Var> parts = {l, r};
    const Tensor& back = tp.val(tp.concat_cols(parts));
    for (int i = 0; i < 8; ++i) CHECK(back[i] == tp.val(x)[i]);

    Var t = tp.slice_rows(x, 1, 2);
    CHECK(tp.val(t).shape == std::vector<int>{1, 4});
    CHECK(tp.val(t)[0] == 5.0);
}
