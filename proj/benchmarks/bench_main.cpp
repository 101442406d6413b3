#include <benchmark/benchmark.h>

#include <vector>

#include "sapr/attack.hpp"
#include "sapr/metrics.hpp"
#include "sapr/rng.hpp"
#include "sapr/tensor.hpp"
#include "sapr/vit.hpp"

namespace {

using namespace sapr;

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    RngStream rng(seed);
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_vector(std::move(shape), std::move(v));
}

Tensor random_image(const ViTConfig& cfg, std::uint64_t seed) {
    return random_tensor({cfg.channels, cfg.image_size, cfg.image_size}, seed, 0.0, 255.0);
}

void bench_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Tensor a = random_tensor({n, n}, 1);
    Tensor b = random_tensor({n, n}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(bench_matmul)->Arg(64)->Arg(128);

void bench_vit_forward(benchmark::State& state) {
    ViTConfig cfg;
    ViTModel model = ViTModel::random_init(cfg, 3);
    Tensor img = random_image(cfg, 4);
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(img));
}
BENCHMARK(bench_vit_forward);

void bench_attack_iteration(benchmark::State& state) {
    ViTConfig cfg;
    ViTModel model = ViTModel::random_init(cfg, 5);
    Tensor img = random_image(cfg, 6);
    AttackConfig ac;
    ac.iterations = 1;
    ac.sapr_enabled = true;
    ac.restructure_threshold = 0.3;
    for (auto _ : state) benchmark::DoNotOptimize(run_attack(img, 0, model, ac));
}
BENCHMARK(bench_attack_iteration);

void bench_restructure(benchmark::State& state) {
    Tensor tokens = random_tensor({65, 64}, 7);
    RngStream rng(8);
    auto perm = rng.permutation(64);
    for (auto& v : perm) ++v;
    for (auto _ : state) benchmark::DoNotOptimize(restructure(tokens, perm));
}
BENCHMARK(bench_restructure);

void bench_ms_ssim(benchmark::State& state) {
    Tensor a = random_tensor({3, 32, 32}, 9, 0.0, 255.0);
    Tensor b = random_tensor({3, 32, 32}, 10, 0.0, 255.0);
    for (auto _ : state) benchmark::DoNotOptimize(ms_ssim(a, b));
}
BENCHMARK(bench_ms_ssim);

} // namespace

BENCHMARK_MAIN();
