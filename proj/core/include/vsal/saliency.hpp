#pragma once

#include <utility>
#include <vector>

#include "vsal/flow.hpp"
#include "vsal/tensor.hpp"

namespace vsal {

// Maximal contiguous frame run without an editing cut; inclusive indices.
struct Shot {
    int start_frame = 0;
    int end_frame = 0;
};

// Per-shot axis-aligned rectangle holding the moving subject; inclusive bounds.
struct SalientRegion {
    Shot shot;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// Shot boundaries from normalized 64-bin grayscale histogram L1 differences.
std::vector<Shot> segment_shots(const std::vector<Tensor>& frames, double threshold = 0.35);

// Prewitt gradient magnitude of the residual-flow magnitude image, thresholded,
// then dilated with radius 2 to close gaps. Returns a 0/1 mask.
Tensor motion_mask(const FlowField& residual, double edge_thresh);

// Tightest rectangle containing all set pixels of the pixelwise union of the
// masks; full-frame rectangle when the union is empty.
SalientRegion union_region(const std::vector<Tensor>& masks, const Shot& shot);

// (salient crop, full frame with the rectangle mean-filled).
std::pair<Tensor, Tensor> split_frame(const Tensor& frame, const SalientRegion& region);

}  // namespace vsal
