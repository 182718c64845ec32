#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "vsal/tensor.hpp"

namespace vsal {

enum class LayerKind { Conv2D, Conv3D, MaxPool2D, MaxPool3D, Relu, Full, Softmax };

// One layer of a feed-forward network. Kernel/stride/pad triples are ordered
// (depth, height, width); 2D layers use the height/width entries only.
struct LayerSpec {
    LayerKind kind;
    int out_channels = 0;                  // conv
    std::array<int, 3> kernel{1, 1, 1};    // conv / pool
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> pad{0, 0, 0};       // conv only
    int out_units = 0;                     // full

    static LayerSpec conv2d(int out_channels, int kh, int kw, int sh = 1, int sw = 1,
                            int ph = 0, int pw = 0) {
        return {LayerKind::Conv2D, out_channels, {1, kh, kw}, {1, sh, sw}, {0, ph, pw}, 0};
    }
    static LayerSpec conv3d(int out_channels, int kd, int kh, int kw, int sd = 1, int sh = 1,
                            int sw = 1, int pd = 0, int ph = 0, int pw = 0) {
        return {LayerKind::Conv3D, out_channels, {kd, kh, kw}, {sd, sh, sw}, {pd, ph, pw}, 0};
    }
    static LayerSpec maxpool2d(int kh, int kw, int sh, int sw) {
        return {LayerKind::MaxPool2D, 0, {1, kh, kw}, {1, sh, sw}, {0, 0, 0}, 0};
    }
    static LayerSpec maxpool3d(int kd, int kh, int kw, int sd, int sh, int sw) {
        return {LayerKind::MaxPool3D, 0, {kd, kh, kw}, {sd, sh, sw}, {0, 0, 0}, 0};
    }
    static LayerSpec relu() { return {LayerKind::Relu, 0, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, 0}; }
    static LayerSpec full(int units) {
        return {LayerKind::Full, 0, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, units};
    }
    static LayerSpec softmax() {
        return {LayerKind::Softmax, 0, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, 0};
    }
};

struct NetworkConfig {
    std::vector<int> input_shape;  // {S,D,H,W} for 3D nets, {S,H,W} for 2D nets
    int classes = 0;
    std::vector<LayerSpec> layers;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Output shape of every layer, validated against the shape law. Entry 0 is the
// input shape; entry i+1 belongs to layer i. Throws ConfigError on impossible
// configurations (empty output, channel mismatch, bad head).
std::vector<std::vector<int>> layer_output_shapes(const NetworkConfig& cfg);

struct LayerParams {
    Tensor weights;  // empty for parameterless layers
    Tensor bias;
};

struct Network {
    NetworkConfig config;
    std::vector<LayerParams> params;
};

// Uniform(-s, s) init with s = sqrt(6 / (fan_in + fan_out)), seeded.
Network init_network(const NetworkConfig& cfg, std::uint64_t seed);

struct ActivationStack {
    std::vector<Tensor> outputs;                  // outputs[0] = input
    std::vector<std::vector<std::size_t>> pool_argmax;  // one entry per layer (empty unless pool)
};

// Softmax class scores plus retained activations for backward.
std::pair<std::vector<double>, ActivationStack> forward(const Network& net, const Tensor& input);

// Gradients of cross-entropy loss at the given label, aligned with net.params.
std::vector<LayerParams> backward(const Network& net, const ActivationStack& stack, int label);

double cross_entropy(const std::vector<double>& scores, int label);

// Mini-batch SGD; deterministic given the seed. Returns mean loss per epoch.
std::vector<double> sgd_train(Network& net, const std::vector<std::pair<Tensor, int>>& dataset,
                              int batch_size, double lr, int epochs, std::uint64_t seed);

// Mean of per-clip softmax scores.
std::vector<double> score_video(const Network& net, const std::vector<Tensor>& clips);

// FNV-1a digest of the canonical config serialization.
std::uint64_t config_digest(const NetworkConfig& cfg);

// Versioned binary checkpoint: magic, config digest, then each tensor as
// rank, extents (int32 LE), row-major float64 LE values.
void save_checkpoint(const Network& net, std::ostream& out);
Network load_checkpoint(const NetworkConfig& cfg, std::istream& in);

}  // namespace vsal
