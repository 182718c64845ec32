#include <benchmark/benchmark.h>

#include <random>

#include "vsal/convnet.hpp"
#include "vsal/flow.hpp"
#include "vsal/tensor.hpp"

namespace {

vsal::Tensor random_tensor(const std::vector<int>& shape, std::uint64_t seed) {
    vsal::Tensor t = vsal::Tensor::zeros(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (double& v : t.data()) v = dist(rng);
    return t;
}

void BM_Conv3dForward(benchmark::State& state) {
    vsal::NetworkConfig cfg;
    cfg.input_shape = {1, 16, 32, 32};
    cfg.classes = 6;
    cfg.layers = {vsal::LayerSpec::conv3d(4, 3, 3, 3), vsal::LayerSpec::relu(),
                  vsal::LayerSpec::maxpool3d(2, 2, 2, 2, 2, 2), vsal::LayerSpec::full(6),
                  vsal::LayerSpec::softmax()};
    vsal::Network net = vsal::init_network(cfg, 1);
    vsal::Tensor input = random_tensor(cfg.input_shape, 2);
    for (auto _ : state) {
        auto [scores, stack] = vsal::forward(net, input);
        benchmark::DoNotOptimize(scores);
    }
}
BENCHMARK(BM_Conv3dForward);

void BM_HornSchunck64(benchmark::State& state) {
    vsal::Tensor a = random_tensor({64, 64}, 3);
    vsal::Tensor b = random_tensor({64, 64}, 4);
    vsal::FlowParams p;
    p.iterations = static_cast<int>(state.range(0));
    for (auto _ : state) {
        vsal::FlowField f = vsal::estimate_flow(a, b, p);
        benchmark::DoNotOptimize(f);
    }
}
BENCHMARK(BM_HornSchunck64)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
