// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace binosplat {

namespace {

inline void hash_mix(std::uint64_t& h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
}

}  // namespace

DisparityMap compute_disparity(const Image& depth_left, double focal, double d_cam, const Image& alpha_left,
                               double alpha_min) {
    if (!(focal > 0.0)) throw std::invalid_argument("compute_disparity: focal length must be positive");
    if (depth_left.width != alpha_left.width || depth_left.height != alpha_left.height)
        throw std::invalid_argument("compute_disparity: depth and alpha dimensions differ");
    DisparityMap out;
    out.values = Image(depth_left.width, depth_left.height, 1);
    out.valid_mask.assign(static_cast<std::size_t>(depth_left.width) * depth_left.height, 0);
    for (int r = 0; r < depth_left.height; ++r)
        for (int c = 0; c < depth_left.width; ++c) {
            const double D = depth_left.at(r, c);
            out.values.at(r, c) = focal * d_cam / std::max(D, kDisparityDepthFloor);
            out.valid_mask[static_cast<std::size_t>(r) * depth_left.width + c] =
                alpha_left.at(r, c) >= alpha_min && D > kDisparityDepthFloor;
        }
    return out;
}

WarpResult warp_right_to_left(const Image& right, const DisparityMap& disparity) {
    if (right.width != disparity.values.width || right.height != disparity.values.height)
        throw std::invalid_argument("warp_right_to_left: image and disparity dimensions differ");
    const int W = right.width;
    WarpResult out;
    out.shifted = Image(W, right.height, right.channels);
    out.mask.assign(static_cast<std::size_t>(W) * right.height, 0);
    for (int r = 0; r < right.height; ++r)
        for (int c = 0; c < W; ++c) {
            const std::size_t p = static_cast<std::size_t>(r) * W + c;
            const double x = c - disparity.values.at(r, c);
            if (!disparity.valid_mask[p] || !(x >= 0.0 && x <= W - 1)) continue;
            const int x0 = static_cast<int>(std::floor(x));
            const int x1 = std::min(x0 + 1, W - 1);
            const double w = x - x0;
            out.mask[p] = 1;
            for (int ch = 0; ch < right.channels; ++ch)
                out.shifted.at(r, c, ch) = (1.0 - w) * right.at(r, x0, ch) + w * right.at(r, x1, ch);
        }
    return out;
}

ConsistencyResult consistency_loss(const Image& left_gt, const Image& right, const Image& depth_left,
                                   const Image& alpha_left, const CameraModel& cam, double d_cam,
                                   const ConsistencyOptions& options) {
    if (!left_gt.same_shape(right) || depth_left.width != right.width || depth_left.height != right.height)
        throw std::invalid_argument("consistency_loss: image and depth dimensions differ");

    const int W = right.width;
    const int H = right.height;
    const int C = right.channels;
    const double f = cam.fx;
    const DisparityMap disp = compute_disparity(depth_left, f, d_cam, alpha_left, options.alpha_min);
    const WarpResult warp = warp_right_to_left(right, disp);

    ConsistencyResult out;
    out.d_right = Image(W, H, C);
    out.d_depth_left = Image(W, H, 1);
    for (auto m : warp.mask) out.masked_pixels += m;
    if (out.masked_pixels == 0) return out;

    const double inv_n = 1.0 / static_cast<double>(out.masked_pixels * C);
    std::uint64_t sig = 0;
    double sum = 0.0;
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const std::size_t p = static_cast<std::size_t>(r) * W + c;
            hash_mix(sig, warp.mask[p]);
            if (!warp.mask[p]) continue;
            const double x = c - disp.values.at(r, c);
            const int x0 = static_cast<int>(std::floor(x));
            const int x1 = std::min(x0 + 1, W - 1);
            const double w = x - x0;
            hash_mix(sig, static_cast<std::uint64_t>(x0));
            double d_disp = 0.0;
            for (int ch = 0; ch < C; ++ch) {
                const double resid = warp.shifted.at(r, c, ch) - left_gt.at(r, c, ch);
                sum += std::abs(resid);
                const double g = resid > 0.0 ? inv_n : (resid < 0.0 ? -inv_n : 0.0);
                hash_mix(sig, resid > 0.0 ? 1 : (resid < 0.0 ? 2 : 3));
                out.d_right.at(r, x0, ch) += (1.0 - w) * g;
                if (x1 != x0) out.d_right.at(r, x1, ch) += w * g;
                const double slope = x1 != x0 ? right.at(r, x1, ch) - right.at(r, x0, ch) : 0.0;
                d_disp += -slope * g;  // dx/d(disparity) = -1
            }
            const double D = depth_left.at(r, c);
            if (D > kDisparityDepthFloor) out.d_depth_left.at(r, c) = d_disp * (-f * d_cam / (D * D));
        }
    out.value = sum * inv_n;
    out.branch_signature = sig;
    return out;
}

double sample_shift(Rng& rng, double d_max) {
    if (!(d_max > 0.0)) throw std::invalid_argument("sample_shift: d_max must be positive");
    std::uniform_real_distribution<double> dist(-d_max, d_max);
    return dist(rng);
}

}  // namespace binosplat
