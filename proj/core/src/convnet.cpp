#include "vsal/convnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace vsal {

namespace {

int conv_extent(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

// Views a 2D activation {S,H,W} as {S,1,H,W} so conv/pool share one path.
struct Dims4 {
    int s, d, h, w;
    std::size_t size() const { return static_cast<std::size_t>(s) * d * h * w; }
    std::size_t at(int cs, int cd, int ch, int cw) const {
        return ((static_cast<std::size_t>(cs) * d + cd) * h + ch) * w + cw;
    }
};

Dims4 as4(const std::vector<int>& shape) {
    if (shape.size() == 4) return {shape[0], shape[1], shape[2], shape[3]};
    if (shape.size() == 3) return {shape[0], 1, shape[1], shape[2]};
    throw ConfigError("activation must have rank 3 or 4");
}

}  // namespace

std::vector<std::vector<int>> layer_output_shapes(const NetworkConfig& cfg) {
    if (cfg.classes < 1) throw ConfigError("class count must be positive");
    if (cfg.input_shape.size() != 3 && cfg.input_shape.size() != 4)
        throw ConfigError("input shape must have rank 3 or 4");
    std::vector<std::vector<int>> shapes{cfg.input_shape};
    bool saw_softmax = false;
    for (const LayerSpec& l : cfg.layers) {
        if (saw_softmax) throw ConfigError("softmax must be the final layer");
        const std::vector<int>& in = shapes.back();
        std::vector<int> out;
        switch (l.kind) {
            case LayerKind::Conv3D: {
                if (in.size() != 4) throw ConfigError("conv3d expects rank-4 input");
                out = {l.out_channels,
                       conv_extent(in[1], l.kernel[0], l.stride[0], l.pad[0]),
                       conv_extent(in[2], l.kernel[1], l.stride[1], l.pad[1]),
                       conv_extent(in[3], l.kernel[2], l.stride[2], l.pad[2])};
                if (l.out_channels < 1 || out[1] < 1 || out[2] < 1 || out[3] < 1)
                    throw ConfigError("conv3d yields empty output");
                break;
            }
            case LayerKind::Conv2D: {
                if (in.size() != 3) throw ConfigError("conv2d expects rank-3 input");
                out = {l.out_channels,
                       conv_extent(in[1], l.kernel[1], l.stride[1], l.pad[1]),
                       conv_extent(in[2], l.kernel[2], l.stride[2], l.pad[2])};
                if (l.out_channels < 1 || out[1] < 1 || out[2] < 1)
                    throw ConfigError("conv2d yields empty output");
                break;
            }
            case LayerKind::MaxPool3D: {
                if (in.size() != 4) throw ConfigError("maxpool3d expects rank-4 input");
                out = {in[0], conv_extent(in[1], l.kernel[0], l.stride[0], 0),
                       conv_extent(in[2], l.kernel[1], l.stride[1], 0),
                       conv_extent(in[3], l.kernel[2], l.stride[2], 0)};
                if (out[1] < 1 || out[2] < 1 || out[3] < 1)
                    throw ConfigError("maxpool3d yields empty output");
                break;
            }
            case LayerKind::MaxPool2D: {
                if (in.size() != 3) throw ConfigError("maxpool2d expects rank-3 input");
                out = {in[0], conv_extent(in[1], l.kernel[1], l.stride[1], 0),
                       conv_extent(in[2], l.kernel[2], l.stride[2], 0)};
                if (out[1] < 1 || out[2] < 1) throw ConfigError("maxpool2d yields empty output");
                break;
            }
            case LayerKind::Relu:
                out = in;
                break;
            case LayerKind::Full: {
                if (l.out_units < 1) throw ConfigError("full layer needs positive units");
                out = {l.out_units};
                break;
            }
            case LayerKind::Softmax: {
                if (in.size() != 1 || in[0] != cfg.classes)
                    throw ConfigError("softmax input must be a class-score vector");
                out = in;
                saw_softmax = true;
                break;
            }
        }
        shapes.push_back(std::move(out));
    }
    if (!saw_softmax) throw ConfigError("network must end in a softmax layer");
    return shapes;
}

Network init_network(const NetworkConfig& cfg, std::uint64_t seed) {
    auto shapes = layer_output_shapes(cfg);
    std::mt19937_64 rng(seed);
    Network net{cfg, {}};
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        const LayerSpec& l = cfg.layers[i];
        LayerParams p;
        if (l.kind == LayerKind::Conv3D || l.kind == LayerKind::Conv2D) {
            const int in_ch = shapes[i][0];
            const int kd = l.kind == LayerKind::Conv3D ? l.kernel[0] : 1;
            const int kh = l.kernel[1], kw = l.kernel[2];
            std::size_t ksz = static_cast<std::size_t>(kd) * kh * kw;
            double fan_in = static_cast<double>(in_ch) * ksz;
            double fan_out = static_cast<double>(l.out_channels) * ksz;
            double s = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-s, s);
            p.weights = l.kind == LayerKind::Conv3D
                            ? Tensor::zeros({l.out_channels, in_ch, kd, kh, kw})
                            : Tensor::zeros({l.out_channels, in_ch, kh, kw});
            for (double& w : p.weights.data()) w = dist(rng);
            p.bias = Tensor::zeros({l.out_channels});
        } else if (l.kind == LayerKind::Full) {
            std::size_t fan_in = shape_product(shapes[i]);
            double s = std::sqrt(6.0 / (static_cast<double>(fan_in) + l.out_units));
            std::uniform_real_distribution<double> dist(-s, s);
            p.weights = Tensor::zeros({l.out_units, static_cast<int>(fan_in)});
            for (double& w : p.weights.data()) w = dist(rng);
            p.bias = Tensor::zeros({l.out_units});
        }
        net.params.push_back(std::move(p));
    }
    return net;
}

namespace {

void conv_forward(const Tensor& in, const std::vector<int>& in_shape, const LayerSpec& l,
                  const LayerParams& p, Tensor& out, const std::vector<int>& out_shape) {
    Dims4 di = as4(in_shape), dout = as4(out_shape);
    const bool is3d = l.kind == LayerKind::Conv3D;
    const int kd = is3d ? l.kernel[0] : 1, kh = l.kernel[1], kw = l.kernel[2];
    const int sd = is3d ? l.stride[0] : 1, sh = l.stride[1], sw = l.stride[2];
    const int pd = is3d ? l.pad[0] : 0, ph = l.pad[1], pw = l.pad[2];
    const double* w = p.weights.data().data();
    const double* x = in.data().data();
    double* y = out.data().data();
    const std::size_t kstep = static_cast<std::size_t>(kd) * kh * kw;
    for (int j = 0; j < dout.s; ++j) {
        const double* wj = w + static_cast<std::size_t>(j) * di.s * kstep;
        const double b = p.bias.data()[j];
        for (int oz = 0; oz < dout.d; ++oz)
            for (int ox = 0; ox < dout.h; ++ox)
                for (int oy = 0; oy < dout.w; ++oy) {
                    double acc = b;
                    for (int s = 0; s < di.s; ++s) {
                        const double* ws = wj + static_cast<std::size_t>(s) * kstep;
                        for (int r = 0; r < kd; ++r) {
                            int iz = oz * sd + r - pd;
                            if (iz < 0 || iz >= di.d) continue;
                            for (int pp = 0; pp < kh; ++pp) {
                                int ix = ox * sh + pp - ph;
                                if (ix < 0 || ix >= di.h) continue;
                                for (int q = 0; q < kw; ++q) {
                                    int iy = oy * sw + q - pw;
                                    if (iy < 0 || iy >= di.w) continue;
                                    acc += ws[(static_cast<std::size_t>(r) * kh + pp) * kw + q] *
                                           x[di.at(s, iz, ix, iy)];
                                }
                            }
                        }
                    }
                    y[dout.at(j, oz, ox, oy)] = acc;
                }
    }
}

void conv_backward(const Tensor& in, const std::vector<int>& in_shape, const LayerSpec& l,
                   const LayerParams& p, const Tensor& delta, const std::vector<int>& out_shape,
                   LayerParams& grad, Tensor& din) {
    Dims4 di = as4(in_shape), dout = as4(out_shape);
    const bool is3d = l.kind == LayerKind::Conv3D;
    const int kd = is3d ? l.kernel[0] : 1, kh = l.kernel[1], kw = l.kernel[2];
    const int sd = is3d ? l.stride[0] : 1, sh = l.stride[1], sw = l.stride[2];
    const int pd = is3d ? l.pad[0] : 0, ph = l.pad[1], pw = l.pad[2];
    const double* w = p.weights.data().data();
    const double* x = in.data().data();
    const double* dy = delta.data().data();
    double* dw = grad.weights.data().data();
    double* db = grad.bias.data().data();
    double* dx = din.data().data();
    const std::size_t kstep = static_cast<std::size_t>(kd) * kh * kw;
    for (int j = 0; j < dout.s; ++j) {
        const std::size_t wj = static_cast<std::size_t>(j) * di.s * kstep;
        for (int oz = 0; oz < dout.d; ++oz)
            for (int ox = 0; ox < dout.h; ++ox)
                for (int oy = 0; oy < dout.w; ++oy) {
                    const double d = dy[dout.at(j, oz, ox, oy)];
                    db[j] += d;
                    if (d == 0.0) continue;
                    for (int s = 0; s < di.s; ++s) {
                        const std::size_t ws = wj + static_cast<std::size_t>(s) * kstep;
                        for (int r = 0; r < kd; ++r) {
                            int iz = oz * sd + r - pd;
                            if (iz < 0 || iz >= di.d) continue;
                            for (int pp = 0; pp < kh; ++pp) {
                                int ix = ox * sh + pp - ph;
                                if (ix < 0 || ix >= di.h) continue;
                                for (int q = 0; q < kw; ++q) {
                                    int iy = oy * sw + q - pw;
                                    if (iy < 0 || iy >= di.w) continue;
                                    std::size_t wi =
                                        ws + (static_cast<std::size_t>(r) * kh + pp) * kw + q;
                                    std::size_t xi = di.at(s, iz, ix, iy);
                                    dw[wi] += d * x[xi];
                                    dx[xi] += d * w[wi];
                                }
                            }
                        }
                    }
                }
    }
}

void pool_forward(const Tensor& in, const std::vector<int>& in_shape, const LayerSpec& l,
                  Tensor& out, const std::vector<int>& out_shape,
                  std::vector<std::size_t>& argmax) {
    Dims4 di = as4(in_shape), dout = as4(out_shape);
    const bool is3d = l.kind == LayerKind::MaxPool3D;
    const int kd = is3d ? l.kernel[0] : 1, kh = l.kernel[1], kw = l.kernel[2];
    const int sd = is3d ? l.stride[0] : 1, sh = l.stride[1], sw = l.stride[2];
    const double* x = in.data().data();
    double* y = out.data().data();
    argmax.assign(out.size(), 0);
    for (int s = 0; s < dout.s; ++s)
        for (int oz = 0; oz < dout.d; ++oz)
            for (int ox = 0; ox < dout.h; ++ox)
                for (int oy = 0; oy < dout.w; ++oy) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_i = 0;
                    for (int r = 0; r < kd; ++r)
                        for (int pp = 0; pp < kh; ++pp)
                            for (int q = 0; q < kw; ++q) {
                                int iz = oz * sd + r, ix = ox * sh + pp, iy = oy * sw + q;
                                if (iz >= di.d || ix >= di.h || iy >= di.w) continue;
                                std::size_t xi = di.at(s, iz, ix, iy);
                                if (x[xi] > best) {
                                    best = x[xi];
                                    best_i = xi;
                                }
                            }
                    std::size_t oi = dout.at(s, oz, ox, oy);
                    y[oi] = best;
                    argmax[oi] = best_i;
                }
}

std::vector<double> softmax_stable(const std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

}  // namespace

std::pair<std::vector<double>, ActivationStack> forward(const Network& net, const Tensor& input) {
    auto shapes = layer_output_shapes(net.config);
    if (input.shape() != net.config.input_shape)
        throw ConfigError("input shape does not match network config");
    ActivationStack stack;
    stack.outputs.reserve(net.config.layers.size() + 1);
    stack.outputs.push_back(input);
    stack.pool_argmax.resize(net.config.layers.size());
    for (std::size_t i = 0; i < net.config.layers.size(); ++i) {
        const LayerSpec& l = net.config.layers[i];
        const Tensor& in = stack.outputs.back();
        Tensor out = Tensor::zeros(shapes[i + 1]);
        switch (l.kind) {
            case LayerKind::Conv3D:
            case LayerKind::Conv2D:
                conv_forward(in, shapes[i], l, net.params[i], out, shapes[i + 1]);
                break;
            case LayerKind::MaxPool3D:
            case LayerKind::MaxPool2D:
                pool_forward(in, shapes[i], l, out, shapes[i + 1], stack.pool_argmax[i]);
                break;
            case LayerKind::Relu:
                for (std::size_t k = 0; k < in.size(); ++k) out[k] = std::max(0.0, in[k]);
                break;
            case LayerKind::Full: {
                const double* w = net.params[i].weights.data().data();
                const double* x = in.data().data();
                const std::size_t n = in.size();
                for (int u = 0; u < l.out_units; ++u) {
                    double acc = net.params[i].bias[u];
                    const double* wu = w + static_cast<std::size_t>(u) * n;
                    for (std::size_t k = 0; k < n; ++k) acc += wu[k] * x[k];
                    out[u] = acc;
                }
                break;
            }
            case LayerKind::Softmax: {
                std::vector<double> p = softmax_stable(in.data());
                std::copy(p.begin(), p.end(), out.data().begin());
                break;
            }
        }
        stack.outputs.push_back(std::move(out));
    }
    return {stack.outputs.back().data(), std::move(stack)};
}

double cross_entropy(const std::vector<double>& scores, int label) {
    if (label < 0 || label >= static_cast<int>(scores.size()))
        throw std::invalid_argument("label out of range");
    return -std::log(std::max(scores[static_cast<std::size_t>(label)], 1e-300));
}

std::vector<LayerParams> backward(const Network& net, const ActivationStack& stack, int label) {
    auto shapes = layer_output_shapes(net.config);
    if (stack.outputs.size() != net.config.layers.size() + 1)
        throw ConfigError("activation stack does not match network config");
    if (label < 0 || label >= net.config.classes)
        throw std::invalid_argument("label out of range");

    const int n = static_cast<int>(net.config.layers.size());
    std::vector<LayerParams> grads(n);
    for (int i = 0; i < n; ++i) {
        if (net.params[i].weights.size() > 0) {
            grads[i].weights = Tensor::zeros(net.params[i].weights.shape());
            grads[i].bias = Tensor::zeros(net.params[i].bias.shape());
        }
    }

    // delta = dL/d(output of layer i); seeded through the softmax head.
    Tensor delta;
    for (int i = n - 1; i >= 0; --i) {
        const LayerSpec& l = net.config.layers[i];
        const Tensor& in = stack.outputs[i];
        const Tensor& out = stack.outputs[i + 1];
        Tensor din = Tensor::zeros(shapes[i]);
        switch (l.kind) {
            case LayerKind::Softmax:
                for (std::size_t k = 0; k < out.size(); ++k)
                    din[k] = out[k] - (static_cast<int>(k) == label ? 1.0 : 0.0);
                break;
            case LayerKind::Relu:
                for (std::size_t k = 0; k < out.size(); ++k)
                    din[k] = out[k] > 0.0 ? delta[k] : 0.0;
                break;
            case LayerKind::Full: {
                const double* w = net.params[i].weights.data().data();
                const double* x = in.data().data();
                const std::size_t m = in.size();
                for (int u = 0; u < l.out_units; ++u) {
                    double d = delta[u];
                    grads[i].bias[u] += d;
                    double* gw = grads[i].weights.data().data() + static_cast<std::size_t>(u) * m;
                    const double* wu = w + static_cast<std::size_t>(u) * m;
                    for (std::size_t k = 0; k < m; ++k) {
                        gw[k] += d * x[k];
                        din[k] += d * wu[k];
                    }
                }
                break;
            }
            case LayerKind::MaxPool3D:
            case LayerKind::MaxPool2D: {
                const auto& amax = stack.pool_argmax[i];
                for (std::size_t k = 0; k < out.size(); ++k) din[amax[k]] += delta[k];
                break;
            }
            case LayerKind::Conv3D:
            case LayerKind::Conv2D:
                conv_backward(in, shapes[i], l, net.params[i], delta, shapes[i + 1], grads[i],
                              din);
                break;
        }
        delta = std::move(din);
    }
    return grads;
}

std::vector<double> sgd_train(Network& net, const std::vector<std::pair<Tensor, int>>& dataset,
                              int batch_size, double lr, int epochs, std::uint64_t seed) {
    if (dataset.empty()) throw std::invalid_argument("sgd_train: dataset is empty");
    if (batch_size < 1) throw std::invalid_argument("sgd_train: batch size must be positive");
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> history;
    for (int e = 0; e < epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            std::size_t stop = std::min(order.size(), start + batch_size);
            std::vector<LayerParams> acc;
            for (std::size_t k = start; k < stop; ++k) {
                const auto& [input, label] = dataset[order[k]];
                auto [scores, stack] = forward(net, input);
                epoch_loss += cross_entropy(scores, label);
                std::vector<LayerParams> g = backward(net, stack, label);
                if (acc.empty()) {
                    acc = std::move(g);
                } else {
                    for (std::size_t i = 0; i < acc.size(); ++i) {
                        if (acc[i].weights.size() == 0) continue;
                        for (std::size_t j = 0; j < acc[i].weights.size(); ++j)
                            acc[i].weights[j] += g[i].weights[j];
                        for (std::size_t j = 0; j < acc[i].bias.size(); ++j)
                            acc[i].bias[j] += g[i].bias[j];
                    }
                }
            }
            const double scale = lr / static_cast<double>(stop - start);
            for (std::size_t i = 0; i < acc.size(); ++i) {
                if (acc[i].weights.size() == 0) continue;
                for (std::size_t j = 0; j < acc[i].weights.size(); ++j)
                    net.params[i].weights[j] -= scale * acc[i].weights[j];
                for (std::size_t j = 0; j < acc[i].bias.size(); ++j)
                    net.params[i].bias[j] -= scale * acc[i].bias[j];
            }
        }
        history.push_back(epoch_loss / static_cast<double>(dataset.size()));
    }
    return history;
}

std::vector<double> score_video(const Network& net, const std::vector<Tensor>& clips) {
    if (clips.empty()) throw std::invalid_argument("score_video: need at least one clip");
    std::vector<double> mean(net.config.classes, 0.0);
    for (const Tensor& clip : clips) {
        auto [scores, stack] = forward(net, clip);
        for (int c = 0; c < net.config.classes; ++c) mean[c] += scores[c];
    }
    for (double& v : mean) v /= static_cast<double>(clips.size());
    return mean;
}

std::uint64_t config_digest(const NetworkConfig& cfg) {
    std::ostringstream ss;
    ss << "in";
    for (int e : cfg.input_shape) ss << ' ' << e;
    ss << " classes " << cfg.classes;
    for (const LayerSpec& l : cfg.layers) {
        ss << " L" << static_cast<int>(l.kind) << ' ' << l.out_channels << ' ' << l.out_units;
        for (int k = 0; k < 3; ++k) ss << ' ' << l.kernel[k] << ' ' << l.stride[k] << ' ' << l.pad[k];
    }
    std::uint64_t h = 14695981039346656037ull;
    for (char c : ss.str()) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

constexpr char kCkptMagic[8] = {'V', 'S', 'A', 'L', 'N', 'E', 'T', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(b, 8);
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated checkpoint");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_tensor(std::ostream& out, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : t.data()) put_f64(out, v);
}

Tensor get_tensor(std::istream& in) {
    int rank = static_cast<int>(get_u32(in));
    if (rank < 1 || rank > 8) throw std::runtime_error("checkpoint tensor rank out of range");
    std::vector<int> shape(rank);
    for (int& e : shape) e = static_cast<int>(get_u32(in));
    Tensor t = Tensor::zeros(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f64(in);
    return t;
}

}  // namespace

void save_checkpoint(const Network& net, std::ostream& out) {
    out.write(kCkptMagic, 8);
    std::uint64_t digest = config_digest(net.config);
    put_u32(out, static_cast<std::uint32_t>(digest & 0xffffffffull));
    put_u32(out, static_cast<std::uint32_t>(digest >> 32));
    std::uint32_t count = 0;
    for (const LayerParams& p : net.params)
        if (p.weights.size() > 0) count += 2;
    put_u32(out, count);
    for (const LayerParams& p : net.params) {
        if (p.weights.size() == 0) continue;
        put_tensor(out, p.weights);
        put_tensor(out, p.bias);
    }
}

Network load_checkpoint(const NetworkConfig& cfg, std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw std::runtime_error("bad checkpoint magic");
    std::uint64_t digest = get_u32(in);
    digest |= static_cast<std::uint64_t>(get_u32(in)) << 32;
    if (digest != config_digest(cfg))
        throw std::runtime_error("checkpoint config digest mismatch");
    std::uint32_t count = get_u32(in);
    Network net = init_network(cfg, 0);
    std::uint32_t seen = 0;
    for (LayerParams& p : net.params) {
        if (p.weights.size() == 0) continue;
        Tensor w = get_tensor(in), b = get_tensor(in);
        if (w.shape() != p.weights.shape() || b.shape() != p.bias.shape())
            throw std::runtime_error("checkpoint tensor shape mismatch");
        p.weights = std::move(w);
        p.bias = std::move(b);
        seen += 2;
    }
    if (seen != count) throw std::runtime_error("checkpoint tensor count mismatch");
    return net;
}

}  // namespace vsal
