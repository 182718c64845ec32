#include "vsal/egomotion.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <random>

namespace vsal {

Point2 Homography::apply(const Point2& p) const {
    double X = m[0] * p.x + m[1] * p.y + m[2];
    double Y = m[3] * p.x + m[4] * p.y + m[5];
    double W = m[6] * p.x + m[7] * p.y + m[8];
    return {X / W, Y / W};
}

double Homography::det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Homography Homography::inverse() const {
    double d = det();
    if (std::abs(d) < 1e-12) throw DegeneracyError("homography is singular");
    std::array<double, 9> a{
        m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
        m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
        m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
    Homography inv;
    double norm = a[8] / d;
    if (std::abs(norm) < 1e-300) throw DegeneracyError("inverse not normalizable");
    for (int i = 0; i < 9; ++i) inv.m[i] = a[i] / d / norm;
    return inv;
}

std::vector<Point2> detect_corners(const Tensor& frame, int max_count) {
    if (frame.rank() != 2 || frame.shape()[0] < 16 || frame.shape()[1] < 16)
        throw std::invalid_argument("detect_corners: frame must be at least 16x16");
    const int h = frame.shape()[0], w = frame.shape()[1];
    auto at = [&](int y, int x) {
        y = std::clamp(y, 0, h - 1);
        x = std::clamp(x, 0, w - 1);
        return frame.data()[static_cast<std::size_t>(y) * w + x];
    };
    std::vector<double> gx(static_cast<std::size_t>(h) * w), gy(gx.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::size_t i = static_cast<std::size_t>(y) * w + x;
            gx[i] = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                    (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
            gy[i] = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                    (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
        }
    constexpr double k = 0.04;
    std::vector<double> resp(gx.size(), 0.0);
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) {
            double sxx = 0, syy = 0, sxy = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    std::size_t i = static_cast<std::size_t>(y + dy) * w + (x + dx);
                    sxx += gx[i] * gx[i];
                    syy += gy[i] * gy[i];
                    sxy += gx[i] * gy[i];
                }
            double tr = sxx + syy;
            resp[static_cast<std::size_t>(y) * w + x] = sxx * syy - sxy * sxy - k * tr * tr;
        }

    struct Cand {
        double r;
        int x, y;
    };
    std::vector<Cand> cands;
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) {
            double r = resp[static_cast<std::size_t>(y) * w + x];
            if (r <= 1e-10) continue;
            cands.push_back({r, x, y});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.r != b.r) return a.r > b.r;
        return a.y != b.y ? a.y < b.y : a.x < b.x;
    });

    constexpr int min_spacing = 8;
    std::vector<Point2> out;
    for (const Cand& c : cands) {
        if (static_cast<int>(out.size()) >= max_count) break;
        bool ok = true;
        for (const Point2& p : out)
            if (std::abs(p.x - c.x) < min_spacing && std::abs(p.y - c.y) < min_spacing) {
                ok = false;
                break;
            }
        if (ok) out.push_back({static_cast<double>(c.x), static_cast<double>(c.y)});
    }
    return out;
}

std::vector<Correspondence> build_correspondences(const std::vector<Point2>& corners,
                                                  const FlowField& flow) {
    std::vector<Correspondence> out;
    for (const Point2& p : corners) {
        int x = static_cast<int>(std::lround(p.x)), y = static_cast<int>(std::lround(p.y));
        if (x < 0 || x >= flow.width || y < 0 || y >= flow.height)
            throw std::invalid_argument("corner outside flow extent");
        Point2 q{p.x + flow.u_at(y, x), p.y + flow.v_at(y, x)};
        if (q.x < 0 || q.x > flow.width - 1 || q.y < 0 || q.y > flow.height - 1) continue;
        out.push_back({p, q});
    }
    return out;
}

namespace {

struct Normalization {
    double cx, cy, s;  // translate by (-cx,-cy) then scale by s
    Point2 apply(const Point2& p) const { return {(p.x - cx) * s, (p.y - cy) * s}; }
};

Normalization hartley_normalization(std::span<const Correspondence> cs, bool second) {
    double cx = 0, cy = 0;
    for (const auto& c : cs) {
        const Point2& p = second ? c.q : c.p;
        cx += p.x;
        cy += p.y;
    }
    cx /= cs.size();
    cy /= cs.size();
    double mean_dist = 0;
    for (const auto& c : cs) {
        const Point2& p = second ? c.q : c.p;
        mean_dist += std::hypot(p.x - cx, p.y - cy);
    }
    mean_dist /= cs.size();
    double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    return {cx, cy, s};
}

}  // namespace

Homography fit_homography_dlt(std::span<const Correspondence> cs) {
    if (cs.size() < 4) throw DegeneracyError("need at least 4 correspondences");
    Normalization np = hartley_normalization(cs, false);
    Normalization nq = hartley_normalization(cs, true);

    Eigen::MatrixXd A(2 * cs.size(), 9);
    for (std::size_t i = 0; i < cs.size(); ++i) {
        Point2 p = np.apply(cs[i].p), q = nq.apply(cs[i].q);
        A.row(2 * i) << -p.x, -p.y, -1, 0, 0, 0, q.x * p.x, q.x * p.y, q.x;
        A.row(2 * i + 1) << 0, 0, 0, -p.x, -p.y, -1, q.y * p.x, q.y * p.y, q.y;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    if (svd.rank() < 8) throw DegeneracyError("degenerate point configuration");
    Eigen::VectorXd hv = svd.matrixV().col(8);

    // Denormalize: H = Tq^-1 * Hn * Tp
    Eigen::Matrix3d Hn;
    Hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
    Eigen::Matrix3d Tp, Tq_inv;
    Tp << np.s, 0, -np.s * np.cx, 0, np.s, -np.s * np.cy, 0, 0, 1;
    Tq_inv << 1 / nq.s, 0, nq.cx, 0, 1 / nq.s, nq.cy, 0, 0, 1;
    Eigen::Matrix3d H = Tq_inv * Hn * Tp;
    if (std::abs(H(2, 2)) < 1e-12) throw DegeneracyError("homography not normalizable");
    H /= H(2, 2);

    Homography out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.m[r * 3 + c] = H(r, c);
    if (std::abs(out.det()) < 1e-12) throw DegeneracyError("estimated homography is singular");
    return out;
}

RansacResult ransac_homography(std::span<const Correspondence> cs, int iters,
                               double inlier_thresh_px, std::uint64_t seed) {
    if (cs.size() < 4) throw NoModelError("need at least 4 correspondences");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, cs.size() - 1);

    int best_count = -1;
    std::vector<char> best_mask(cs.size(), 0);
    Homography best_model;
    std::array<Correspondence, 4> sample;
    for (int it = 0; it < iters; ++it) {
        std::array<std::size_t, 4> idx;
        for (int k = 0; k < 4; ++k) {
            std::size_t j;
            bool dup;
            do {
                j = pick(rng);
                dup = false;
                for (int l = 0; l < k; ++l)
                    if (idx[l] == j) dup = true;
            } while (dup);
            idx[k] = j;
            sample[k] = cs[j];
        }
        Homography h;
        try {
            h = fit_homography_dlt(std::span<const Correspondence>(sample.data(), 4));
        } catch (const DegeneracyError&) {
            continue;
        }
        std::vector<char> mask(cs.size(), 0);
        int count = 0;
        for (std::size_t i = 0; i < cs.size(); ++i) {
            Point2 q = h.apply(cs[i].p);
            if (std::hypot(q.x - cs[i].q.x, q.y - cs[i].q.y) < inlier_thresh_px) {
                mask[i] = 1;
                ++count;
            }
        }
        if (count > best_count) {
            best_count = count;
            best_mask = std::move(mask);
            best_model = h;
        }
    }
    if (best_count < 4) throw NoModelError("no model with at least 4 inliers");

    // Refit on all inliers.
    std::vector<Correspondence> inl;
    for (std::size_t i = 0; i < cs.size(); ++i)
        if (best_mask[i]) inl.push_back(cs[i]);
    Homography refined = best_model;
    try {
        refined = fit_homography_dlt(inl);
    } catch (const DegeneracyError&) {
        // keep the minimal-sample model
    }
    std::vector<char> mask(cs.size(), 0);
    int count = 0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        Point2 q = refined.apply(cs[i].p);
        if (std::hypot(q.x - cs[i].q.x, q.y - cs[i].q.y) < inlier_thresh_px) {
            mask[i] = 1;
            ++count;
        }
    }
    if (count < 4) throw NoModelError("refit lost the consensus set");
    return {refined, std::move(mask), count};
}

FlowField residual_flow(const FlowField& flow, const Homography& h, double min_magnitude) {
    if (std::abs(h.det()) < 1e-12) throw DegeneracyError("residual_flow: singular homography");
    FlowField out = FlowField::zeros(flow.height, flow.width);
    for (int y = 0; y < flow.height; ++y)
        for (int x = 0; x < flow.width; ++x) {
            Point2 q = h.apply({static_cast<double>(x), static_cast<double>(y)});
            double ru = flow.u_at(y, x) - (q.x - x);
            double rv = flow.v_at(y, x) - (q.y - y);
            if (std::hypot(ru, rv) < min_magnitude) {
                ru = 0;
                rv = 0;
            }
            out.u_at(y, x) = ru;
            out.v_at(y, x) = rv;
        }
    return out;
}

}  // namespace vsal
