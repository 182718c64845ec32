#include "vsal/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace vsal {

namespace {

constexpr float kFloMagic = 202021.25f;

inline double px(const Tensor& img, int y, int x) {
    const int h = img.shape()[0], w = img.shape()[1];
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return img.data()[static_cast<std::size_t>(y) * w + x];
}

double sample_bilinear(const Tensor& img, double y, double x) {
    int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    double wy = y - y0, wx = x - x0;
    double top = px(img, y0, x0) * (1 - wx) + px(img, y0, x0 + 1) * wx;
    double bot = px(img, y0 + 1, x0) * (1 - wx) + px(img, y0 + 1, x0 + 1) * wx;
    return top * (1 - wy) + bot * wy;
}

Tensor downsample2(const Tensor& img) {
    const int h = img.shape()[0], w = img.shape()[1];
    const int oh = (h + 1) / 2, ow = (w + 1) / 2;
    Tensor out = Tensor::zeros({oh, ow});
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out.at({y, x}) = 0.25 * (px(img, 2 * y, 2 * x) + px(img, 2 * y, 2 * x + 1) +
                                     px(img, 2 * y + 1, 2 * x) + px(img, 2 * y + 1, 2 * x + 1));
    return out;
}

FlowField upsample2(const FlowField& f, int out_h, int out_w) {
    FlowField out = FlowField::zeros(out_h, out_w);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            double sy = (y + 0.5) * f.height / out_h - 0.5;
            double sx = (x + 0.5) * f.width / out_w - 0.5;
            int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
            double wy = sy - y0, wx = sx - x0;
            auto at = [&](const std::vector<double>& c, int yy, int xx) {
                yy = std::clamp(yy, 0, f.height - 1);
                xx = std::clamp(xx, 0, f.width - 1);
                return c[static_cast<std::size_t>(yy) * f.width + xx];
            };
            double uu = (at(f.u, y0, x0) * (1 - wx) + at(f.u, y0, x0 + 1) * wx) * (1 - wy) +
                        (at(f.u, y0 + 1, x0) * (1 - wx) + at(f.u, y0 + 1, x0 + 1) * wx) * wy;
            double vv = (at(f.v, y0, x0) * (1 - wx) + at(f.v, y0, x0 + 1) * wx) * (1 - wy) +
                        (at(f.v, y0 + 1, x0) * (1 - wx) + at(f.v, y0 + 1, x0 + 1) * wx) * wy;
            // Displacements scale with the resolution change.
            out.u_at(y, x) = uu * out_w / f.width;
            out.v_at(y, x) = vv * out_h / f.height;
        }
    return out;
}

// One Horn-Schunck solve for the flow increment on (prev, next warped by init).
void hs_refine(const Tensor& prev, const Tensor& next, FlowField& flow, const FlowParams& p) {
    const int h = prev.shape()[0], w = prev.shape()[1];
    // Warp next towards prev by the current flow estimate.
    Tensor warped = Tensor::zeros({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            warped.at({y, x}) = sample_bilinear(next, y + flow.v_at(y, x), x + flow.u_at(y, x));

    // The alpha default assumes the classic 0..255 intensity scale; frames
    // arrive in [0,1], so gradients are scaled up to match.
    constexpr double kIntensityScale = 255.0;
    std::vector<double> ix(static_cast<std::size_t>(h) * w), iy(ix.size()), it(ix.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::size_t i = static_cast<std::size_t>(y) * w + x;
            ix[i] = kIntensityScale * 0.25 *
                    (px(prev, y, x + 1) - px(prev, y, x - 1) +
                     px(warped, y, x + 1) - px(warped, y, x - 1));
            iy[i] = kIntensityScale * 0.25 *
                    (px(prev, y + 1, x) - px(prev, y - 1, x) +
                     px(warped, y + 1, x) - px(warped, y - 1, x));
            it[i] = kIntensityScale * (warped.data()[i] - prev.data()[i]);
        }

    std::vector<double> du(ix.size(), 0.0), dv(ix.size(), 0.0);
    std::vector<double> du_next(ix.size()), dv_next(ix.size());
    const double a2 = p.alpha * p.alpha;
    auto nb = [&](const std::vector<double>& c, int y, int x) {
        auto at = [&](int yy, int xx) {
            yy = std::clamp(yy, 0, h - 1);
            xx = std::clamp(xx, 0, w - 1);
            return c[static_cast<std::size_t>(yy) * w + xx];
        };
        return 0.25 * (at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1));
    };
    for (int iter = 0; iter < p.iterations; ++iter) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                std::size_t i = static_cast<std::size_t>(y) * w + x;
                double ub = nb(du, y, x), vb = nb(dv, y, x);
                double t = (ix[i] * ub + iy[i] * vb + it[i]) / (a2 + ix[i] * ix[i] + iy[i] * iy[i]);
                du_next[i] = ub - ix[i] * t;
                dv_next[i] = vb - iy[i] * t;
            }
        du.swap(du_next);
        dv.swap(dv_next);
    }
    for (std::size_t i = 0; i < du.size(); ++i) {
        flow.u[i] += du[i];
        flow.v[i] += dv[i];
    }
}

}  // namespace

FlowField FlowField::zeros(int height, int width) {
    FlowField f;
    f.width = width;
    f.height = height;
    f.u.assign(static_cast<std::size_t>(width) * height, 0.0);
    f.v.assign(static_cast<std::size_t>(width) * height, 0.0);
    return f;
}

FlowField estimate_flow(const Tensor& prev, const Tensor& next, const FlowParams& params) {
    if (prev.rank() != 2 || next.rank() != 2 || prev.shape() != next.shape())
        throw std::invalid_argument("estimate_flow: frames must be rank 2 with equal shape");
    const int h = prev.shape()[0], w = prev.shape()[1];
    if (h < 8 || w < 8) throw std::invalid_argument("estimate_flow: frames smaller than 8x8");

    std::vector<Tensor> prevs{prev}, nexts{next};
    for (int l = 1; l < params.pyramid_levels; ++l) {
        if (prevs.back().shape()[0] < 16 || prevs.back().shape()[1] < 16) break;
        prevs.push_back(downsample2(prevs.back()));
        nexts.push_back(downsample2(nexts.back()));
    }

    FlowField flow = FlowField::zeros(prevs.back().shape()[0], prevs.back().shape()[1]);
    for (int l = static_cast<int>(prevs.size()) - 1; l >= 0; --l) {
        const int lh = prevs[l].shape()[0], lw = prevs[l].shape()[1];
        if (flow.height != lh || flow.width != lw) flow = upsample2(flow, lh, lw);
        hs_refine(prevs[l], nexts[l], flow, params);
    }
    return flow;
}

void write_flo(const FlowField& f, std::ostream& out) {
    auto put32 = [&](std::uint32_t v) {
        char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
        out.write(b, 4);
    };
    std::uint32_t magic;
    std::memcpy(&magic, &kFloMagic, 4);
    put32(magic);
    put32(static_cast<std::uint32_t>(f.width));
    put32(static_cast<std::uint32_t>(f.height));
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            float uu = static_cast<float>(f.u_at(y, x));
            float vv = static_cast<float>(f.v_at(y, x));
            std::uint32_t bu, bv;
            std::memcpy(&bu, &uu, 4);
            std::memcpy(&bv, &vv, 4);
            put32(bu);
            put32(bv);
        }
}

FlowField read_flo(std::istream& in) {
    auto get32 = [&]() -> std::uint32_t {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated .flo stream");
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };
    std::uint32_t raw = get32();
    float magic;
    std::memcpy(&magic, &raw, 4);
    if (magic != kFloMagic) throw std::runtime_error(".flo stream has wrong magic");
    int w = static_cast<int>(get32());
    int h = static_cast<int>(get32());
    if (w < 1 || h < 1) throw std::runtime_error(".flo stream has invalid extents");
    FlowField f = FlowField::zeros(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint32_t bu = get32(), bv = get32();
            float uu, vv;
            std::memcpy(&uu, &bu, 4);
            std::memcpy(&vv, &bv, 4);
            f.u_at(y, x) = uu;
            f.v_at(y, x) = vv;
        }
    return f;
}

}  // namespace vsal
