#pragma once

#include <iosfwd>
#include <vector>

#include "vsal/tensor.hpp"

namespace vsal {

// Dense per-pixel displacement field between two consecutive frames.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> u;  // horizontal displacement, row-major
    std::vector<double> v;  // vertical displacement

    double& u_at(int y, int x) { return u[static_cast<std::size_t>(y) * width + x]; }
    double& v_at(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
    double u_at(int y, int x) const { return u[static_cast<std::size_t>(y) * width + x]; }
    double v_at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }

    static FlowField zeros(int height, int width);
};

struct FlowParams {
    double alpha = 10.0;   // smoothness weight
    int iterations = 200;  // Jacobi fixed-point iterations per scale
    int pyramid_levels = 1;
};

// Horn-Schunck variational flow between two grayscale frames in [0,1].
// Frames must share shape and be at least 8x8.
FlowField estimate_flow(const Tensor& prev, const Tensor& next, const FlowParams& params = {});

// Middlebury-style .flo: magic float 202021.25, int32 LE width/height, then
// row-major interleaved (u,v) float32. Doubles are narrowed on write.
void write_flo(const FlowField& f, std::ostream& out);
FlowField read_flo(std::istream& in);

}  // namespace vsal
