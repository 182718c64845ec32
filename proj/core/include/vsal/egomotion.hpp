#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "vsal/flow.hpp"
#include "vsal/tensor.hpp"

namespace vsal {

struct Point2 {
    double x = 0;
    double y = 0;
};

// p in frame t, q in frame t+1, pixel units.
struct Correspondence {
    Point2 p;
    Point2 q;
};

// 3x3 projective transform, normalized so m[8] == 1.
struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return {}; }
    Point2 apply(const Point2& p) const;
    Homography inverse() const;
    double det() const;
};

struct DegeneracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Harris corners (k = 0.04, 3x3 Sobel gradients), non-maximum suppression
// radius 8 px, sorted by response descending. Frame must be at least 16x16.
std::vector<Point2> detect_corners(const Tensor& frame, int max_count);

// q = p + flow(p); correspondences leaving the frame are dropped.
std::vector<Correspondence> build_correspondences(const std::vector<Point2>& corners,
                                                  const FlowField& flow);

// Normalized DLT least-squares homography from >= 4 correspondences.
Homography fit_homography_dlt(std::span<const Correspondence> cs);

struct RansacResult {
    Homography model;
    std::vector<char> inliers;  // one flag per correspondence
    int inlier_count = 0;
};

RansacResult ransac_homography(std::span<const Correspondence> cs, int iters,
                               double inlier_thresh_px, std::uint64_t seed);

// flow(p) minus the homography-induced displacement H*p - p; residuals with
// magnitude below min_magnitude are zeroed.
FlowField residual_flow(const FlowField& flow, const Homography& h, double min_magnitude);

}  // namespace vsal
