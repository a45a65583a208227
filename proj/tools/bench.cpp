// Microbenchmarks for the hot paths: raw matrix kernels and full training
// steps. Prints GFLOP/s so kernel regressions are visible at a glance.

#include <chrono>
#include <cstdio>
#include <vector>

#include "ipkp/gemm.hpp"
#include "ipkp/model.hpp"
#include "ipkp/ops.hpp"
#include "ipkp/optim.hpp"
#include "ipkp/rng.hpp"

using namespace ipkp;
using Clock = std::chrono::steady_clock;

static double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

static void bench_gemm(int M, int N, int K, int iters) {
    std::vector<float> A(static_cast<size_t>(M) * K), B(static_cast<size_t>(K) * N),
        C(static_cast<size_t>(M) * N);
    Rng rng(7);
    for (auto& v : A) v = rng.normal();
    for (auto& v : B) v = rng.normal();
    gemm_nn(M, N, K, A.data(), B.data(), C.data(), false);  // warm up
    auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i) gemm_nn(M, N, K, A.data(), B.data(), C.data(), false);
    double dt = seconds_since(t0);
    double flops = 2.0 * M * N * K * iters;
    std::printf("gemm_nn %4d x %4d x %4d: %7.2f GFLOP/s (%.3fs / %d iters)\n", M, N, K,
                flops / dt / 1e9, dt, iters);
}

static void bench_training_step(int batch, int iters) {
    Model m = lenet5();
    init_params(m, {InitScheme::Kind::GlorotUniform, 42});
    Tensor x({batch, 1, 28, 28});
    Rng rng(3);
    for (auto& v : x.data) v = static_cast<float>(rng.next_unit());
    std::vector<int> labels(static_cast<size_t>(batch));
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
    Activations acts;
    Workspace ws;
    Gradients grads;
    OptState opt;
    OptimizerConfig cfg;  // momentum SGD defaults
    forward(m, x, acts, &ws);
    auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i) {
        forward(m, x, acts, &ws);
        auto [loss, dlogits] = loss_softmax_ce(acts.acts.back(), labels);
        backward(m, acts, dlogits, grads, &ws);
        optimizer_step(m, grads, opt, cfg);
        (void)loss;
    }
    double dt = seconds_since(t0);
    std::printf("train step batch %3d: %8.1f items/s (%.4f s/step, %d iters)\n", batch,
                batch * iters / dt, dt / iters, iters);

    auto t1 = Clock::now();
    for (int i = 0; i < iters; ++i) forward(m, x, acts, &ws);
    double dt_f = seconds_since(t1);
    std::printf("forward    batch %3d: %8.1f items/s (%.4f s/pass)\n", batch,
                batch * iters / dt_f, dt_f / iters);
}

int main() {
    bench_gemm(6, 784, 25, 2000);    // first conv as seen by im2col
    bench_gemm(16, 100, 150, 8000);  // second conv
    bench_gemm(32, 120, 400, 4000);  // dense 400->120 over a batch
    bench_gemm(256, 256, 256, 60);
    bench_training_step(32, 200);
    bench_training_step(256, 30);
    return 0;
}
