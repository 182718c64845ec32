#include "vsal/saliency.hpp"

#include <algorithm>
#include <cmath>

namespace vsal {

std::vector<Shot> segment_shots(const std::vector<Tensor>& frames, double threshold) {
    if (frames.empty()) throw std::invalid_argument("segment_shots: need at least one frame");
    constexpr int bins = 64;
    auto histogram = [&](const Tensor& f) {
        std::vector<double> h(bins, 0.0);
        for (double v : f.data()) {
            int b = std::clamp(static_cast<int>(v * bins), 0, bins - 1);
            h[b] += 1.0;
        }
        for (double& x : h) x /= static_cast<double>(f.size());
        return h;
    };
    std::vector<Shot> shots;
    int start = 0;
    std::vector<double> prev_hist = histogram(frames[0]);
    for (std::size_t t = 1; t < frames.size(); ++t) {
        std::vector<double> h = histogram(frames[t]);
        double diff = 0;
        for (int b = 0; b < bins; ++b) diff += std::abs(h[b] - prev_hist[b]);
        if (diff > threshold) {
            shots.push_back({start, static_cast<int>(t) - 1});
            start = static_cast<int>(t);
        }
        prev_hist = std::move(h);
    }
    shots.push_back({start, static_cast<int>(frames.size()) - 1});
    return shots;
}

Tensor motion_mask(const FlowField& residual, double edge_thresh) {
    const int h = residual.height, w = residual.width;
    Tensor mag = Tensor::zeros({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            mag.at({y, x}) = std::hypot(residual.u_at(y, x), residual.v_at(y, x));

    auto at = [&](int y, int x) {
        y = std::clamp(y, 0, h - 1);
        x = std::clamp(x, 0, w - 1);
        return mag.data()[static_cast<std::size_t>(y) * w + x];
    };
    Tensor edges = Tensor::zeros({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double px = (at(y - 1, x + 1) + at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + at(y, x - 1) + at(y + 1, x - 1));
            double py = (at(y + 1, x - 1) + at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + at(y - 1, x) + at(y - 1, x + 1));
            if (std::hypot(px, py) > edge_thresh) edges.at({y, x}) = 1.0;
        }

    constexpr int radius = 2;
    Tensor mask = Tensor::zeros({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (edges.at({y, x}) == 0.0) continue;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < h && xx >= 0 && xx < w) mask.at({yy, xx}) = 1.0;
                }
        }
    return mask;
}

SalientRegion union_region(const std::vector<Tensor>& masks, const Shot& shot) {
    if (masks.empty()) throw std::invalid_argument("union_region: need at least one mask");
    const int h = masks[0].shape()[0], w = masks[0].shape()[1];
    for (const Tensor& m : masks)
        if (m.shape() != masks[0].shape())
            throw std::invalid_argument("union_region: masks must share extent");
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    for (const Tensor& m : masks)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (m.at({y, x}) != 0.0) {
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x);
                    y1 = std::max(y1, y);
                }
    if (x1 < 0) return {shot, 0, 0, w - 1, h - 1};  // empty union: full-frame fallback
    return {shot, x0, y0, x1, y1};
}

std::pair<Tensor, Tensor> split_frame(const Tensor& frame, const SalientRegion& region) {
    if (frame.rank() != 2) throw std::invalid_argument("split_frame: expected rank-2 frame");
    const int h = frame.shape()[0], w = frame.shape()[1];
    if (region.x0 < 0 || region.y0 < 0 || region.x1 >= w || region.y1 >= h ||
        region.x0 > region.x1 || region.y0 > region.y1)
        throw std::invalid_argument("split_frame: region outside frame");

    Tensor salient = frame.slice_crop({{region.y0, region.y1 + 1}, {region.x0, region.x1 + 1}});
    double mean = 0;
    for (double v : frame.data()) mean += v;
    mean /= static_cast<double>(frame.size());
    Tensor background = frame;
    for (int y = region.y0; y <= region.y1; ++y)
        for (int x = region.x0; x <= region.x1; ++x) background.at({y, x}) = mean;
    return {std::move(salient), std::move(background)};
}

}  // namespace vsal
