// Timing comparison of the numeric kernels: associative-scan serial vs
// chunked-parallel form, the small gemm kernels, and one full recurrence
// block at the two shipped model scales.
//
//   ./bench_kernels [filter]
//
// On a single-core host the chunked scan shows its ~3x pass overhead; the
// chunked form wins wall-clock only when OpenMP has threads to spread the
// chunks over.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "mimic/ssm/init.hpp"
#include "mimic/ssm/kernels.hpp"
#include "mimic/ssm/layer.hpp"
#include "mimic/ssm/scan.hpp"
#include "mimic/util/rng.hpp"

using namespace mimic;

namespace {

double time_median(int reps, const std::function<void()>& fn) {
    using clock = std::chrono::steady_clock;
    std::vector<double> ts;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock::now();
        fn();
        ts.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    }
    std::sort(ts.begin(), ts.end());
    return ts[ts.size() / 2];
}

void bench_scan() {
    std::printf("-- associative scan, float, state width 64 --\n");
    std::printf("%10s %10s %12s %12s %12s %12s\n", "length", "serial", "chunks=4",
                "chunks=16", "chunks=64", "ns/elt ser");
    const std::size_t p = 64;
    util::Rng rng(1);
    for (const std::size_t l : {std::size_t(4096), std::size_t(65536),
                                std::size_t(1) << 20}) {
        std::vector<float> a_re(l * p), a_im(l * p), b_re(l * p), b_im(l * p),
            x_re(l * p), x_im(l * p);
        for (std::size_t i = 0; i < l * p; ++i) {
            a_re[i] = static_cast<float>(0.9 + 0.05 * rng.uniform());
            a_im[i] = static_cast<float>(0.1 * rng.uniform());
            b_re[i] = static_cast<float>(rng.normal());
            b_im[i] = static_cast<float>(rng.normal());
        }
        const double ser = time_median(5, [&] {
            ssm::scan_serial(l, p, a_re.data(), a_im.data(), b_re.data(),
                             b_im.data(), x_re.data(), x_im.data());
        });
        double par[3];
        const std::size_t hints[3] = {4, 16, 64};
        for (int h = 0; h < 3; ++h)
            par[h] = time_median(5, [&] {
                ssm::scan_parallel(l, p, a_re.data(), a_im.data(), b_re.data(),
                                   b_im.data(), x_re.data(), x_im.data(), hints[h]);
            });
        std::printf("%10zu %9.2fms %10.2fms %10.2fms %10.2fms %10.2f\n", l,
                    ser * 1e3, par[0] * 1e3, par[1] * 1e3, par[2] * 1e3,
                    ser * 1e9 / static_cast<double>(l * p));
    }
}

void bench_gemm() {
    std::printf("-- gemm kernels, float (rows 2300) --\n");
    std::printf("%6s %6s %6s %10s %10s\n", "n", "k", "kind", "ms", "GFLOP/s");
    const std::size_t m = 2300;
    util::Rng rng(2);
    for (const std::size_t d : {std::size_t(64), std::size_t(128),
                                std::size_t(256)}) {
        std::vector<float> x(m * d), w(d * d), out(m * d);
        for (auto& v : x) v = static_cast<float>(rng.normal());
        for (auto& v : w) v = static_cast<float>(0.1 * rng.normal());
        const double flops = 2.0 * static_cast<double>(m) * d * d;
        const double t_nn = time_median(5, [&] {
            std::fill(out.begin(), out.end(), 0.0f);
            ssm::gemm_nn(m, d, d, x.data(), w.data(), out.data());
        });
        const double t_nt = time_median(5, [&] {
            std::fill(out.begin(), out.end(), 0.0f);
            ssm::gemm_nt(m, d, d, x.data(), w.data(), out.data());
        });
        const double t_tn = time_median(5, [&] {
            std::fill(w.begin(), w.end(), 0.0f);
            ssm::gemm_tn(m, d, d, x.data(), out.data(), w.data());
        });
        std::printf("%6zu %6zu %6s %9.2f %10.1f\n", d, d, "nn", t_nn * 1e3,
                    flops / t_nn * 1e-9);
        std::printf("%6zu %6zu %6s %9.2f %10.1f\n", d, d, "nt", t_nt * 1e3,
                    flops / t_nt * 1e-9);
        std::printf("%6zu %6zu %6s %9.2f %10.1f\n", d, d, "tn", t_tn * 1e3,
                    flops / t_tn * 1e-9);
    }
}

void bench_block() {
    std::printf("-- recurrence block forward+backward, float --\n");
    std::printf("%8s %6s %6s %12s %12s %12s\n", "length", "width", "state",
                "fwd ms", "bwd ms", "us/token");
    struct Shape {
        std::size_t l, h, p;
    };
    for (const Shape s : {Shape{2300, 64, 64}, Shape{2300, 128, 256},
                          Shape{11500, 128, 256}}) {
        ssm::S5Block<float> blk;
        blk.init(s.h, s.p);
        ssm::init_block(blk, 7);
        util::Rng rng(3);
        std::vector<float> u(s.l * s.h), out(s.l * s.h), g_out(s.l * s.h),
            g_u(s.l * s.h);
        for (auto& v : u) v = static_cast<float>(rng.normal());
        for (auto& v : g_out) v = static_cast<float>(0.01 * rng.normal());
        ssm::BlockWork<float> w;
        const double fwd = time_median(3, [&] {
            ssm::block_forward(blk, s.l, u.data(), out.data(), w, false);
        });
        const double bwd = time_median(3, [&] {
            ssm::block_backward(blk, s.l, u.data(), g_out.data(), g_u.data(), w,
                                false);
        });
        std::printf("%8zu %6zu %6zu %11.2f %11.2f %11.2f\n", s.l, s.h, s.p,
                    fwd * 1e3, bwd * 1e3,
                    (fwd + bwd) * 1e6 / static_cast<double>(s.l));
    }
}

} // namespace

int main(int argc, char** argv) {
    const std::string filter = argc > 1 ? argv[1] : "";
    if (filter.empty() || filter == "scan") bench_scan();
    if (filter.empty() || filter == "gemm") bench_gemm();
    if (filter.empty() || filter == "block") bench_block();
    return 0;
}
