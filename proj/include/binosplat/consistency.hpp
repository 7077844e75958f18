// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binosplat/camera.hpp"
#include "binosplat/image.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace binosplat {

using Rng = std::mt19937_64;

/// Signed horizontal pixel offsets from a rendered depth map.
struct DisparityMap {
    Image values;  // H x W x 1
    std::vector<std::uint8_t> valid_mask;
};

inline constexpr double kDisparityDepthFloor = 1e-6;

/// d = f * d_cam / max(depth, 1e-6); valid where alpha >= alpha_min and depth > 1e-6.
DisparityMap compute_disparity(const Image& depth_left, double focal, double d_cam, const Image& alpha_left,
                               double alpha_min);

struct WarpResult {
    Image shifted;                      // H x W x 3
    std::vector<std::uint8_t> mask;     // sample inside [0, W-1] and disparity valid
};

/// Linear interpolation of I_right along each row at column c - disparity.
WarpResult warp_right_to_left(const Image& right, const DisparityMap& disparity);

struct ConsistencyOptions {
    double alpha_min = 0.5;
};

struct ConsistencyResult {
    double value = 0.0;
    Image d_right;        // adjoint w.r.t. the rendered translated-view image
    Image d_depth_left;   // adjoint w.r.t. the rendered source-view depth
    std::size_t masked_pixels = 0;
    /// Hash of the sampling cells, masks and residual signs; equal hashes mean
    /// two evaluations lie on the same smooth piece of the loss.
    std::uint64_t branch_signature = 0;
};

/// Mean absolute difference between the source image and the translated
/// render warped back through the source depth, over the sample mask.
/// `d_cam` is the rightward shift of the camera that rendered `right`.
ConsistencyResult consistency_loss(const Image& left_gt, const Image& right, const Image& depth_left,
                                   const Image& alpha_left, const CameraModel& cam, double d_cam,
                                   const ConsistencyOptions& options = {});

/// Uniform shift in [-d_max, d_max].
double sample_shift(Rng& rng, double d_max);

}  // namespace binosplat
