#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include <CLI11.hpp>

#include "idcr/kernels.hpp"
#include "idcr/rng.hpp"

// Times the serial and OpenMP matmul variants across sizes and checks that
// both produce bit-identical output (row-parallel scheduling preserves the
// accumulation order).

namespace {

using clock_type = std::chrono::steady_clock;

double time_ms(const std::function<void()>& f, int reps) {
    f(); // warm-up
    auto t0 = clock_type::now();
    for (int r = 0; r < reps; ++r) f();
    auto t1 = clock_type::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP kernel benchmark"};
    int reps = 5;
    int threads = 0;
    app.add_option("--reps", reps, "timed repetitions per size");
    app.add_option("--threads", threads, "OpenMP thread cap (0: default)");
    CLI11_PARSE(app, argc, argv);

    if (threads > 0) idcr::kernels::set_num_threads(threads);

    const int sizes[] = {32, 64, 128, 256};
    std::printf("%-10s %12s %12s %9s %9s\n", "matmul", "serial(ms)", "omp(ms)", "speedup",
                "bitwise");
    bool all_equal = true;
    for (int n : sizes) {
        std::vector<double> a(static_cast<size_t>(n) * n), b(a.size()), cs(a.size()),
            cp(a.size());
        idcr::Rng rng = idcr::rng_stream(42, static_cast<uint64_t>(n));
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = rng.normal();

        double ts = time_ms(
            [&] { idcr::kernels::matmul_serial(a.data(), b.data(), cs.data(), n, n, n); },
            reps);
        double tp = time_ms(
            [&] { idcr::kernels::matmul_omp(a.data(), b.data(), cp.data(), n, n, n); },
            reps);
        bool equal = std::memcmp(cs.data(), cp.data(), cs.size() * sizeof(double)) == 0;
        all_equal = all_equal && equal;
        char label[32];
        std::snprintf(label, sizeof(label), "%dx%dx%d", n, n, n);
        std::printf("%-10s %12.3f %12.3f %8.2fx %9s\n", label, ts, tp, ts / tp,
                    equal ? "yes" : "NO");
    }
    if (!all_equal) {
        std::printf("FAIL: serial and OpenMP outputs differ\n");
        return 1;
    }
    return 0;
}
