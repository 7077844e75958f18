// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binosplat/camera.hpp"
#include "binosplat/gaussian_cloud.hpp"
#include "binosplat/image.hpp"

#include <cstdint>
#include <vector>

namespace binosplat {

struct RenderSettings {
    double alpha_clamp = 0.99;
    double alpha_skip = 1.0 / 255.0;
    double transmittance_min = 1e-4;
    double dilation = kLowPassDilation;
    bool normalize_depth = true;
    double depth_eps = 1e-8;
    /// Tile binning is an exact fast path; false evaluates every Gaussian at every pixel.
    bool use_tiles = true;
    int tile_size = 16;
};

struct Framebuffer {
    Image color;  // H x W x 3
    Image depth;  // H x W x 1
    Image alpha;  // H x W x 1
    Vec3 background = Vec3::Zero();
};

/// d(loss)/d(raw parameter) for every Gaussian of the rendered cloud.
struct GradientBuffer {
    std::vector<Vec3> d_positions;
    std::vector<Vec4> d_rotations;
    std::vector<Vec3> d_log_scales;
    std::vector<double> d_opacity_logits;
    std::vector<Vec3> d_colors;
    /// Gradient with respect to the projected 2D center, in pixels.
    std::vector<Vec2> d_means2d;
    std::vector<std::uint8_t> visible;

    GradientBuffer() = default;
    explicit GradientBuffer(std::size_t n);
    std::size_t size() const { return d_positions.size(); }
    GradientBuffer& operator+=(const GradientBuffer& other);
    bool all_finite() const;
};

/// Screen-space footprint of one Gaussian that survived culling.
struct ProjectedGaussian {
    std::uint32_t index = 0;
    Vec3 p_cam = Vec3::Zero();
    Vec2 mean = Vec2::Zero();
    Mat2 conic = Mat2::Identity();
    Mat3 sigma = Mat3::Identity();
    Mat23 jacobian = Mat23::Zero();
    double opacity = 0.0;
    Vec3 rgb = Vec3::Zero();
    int x_min = 0, x_max = -1, y_min = 0, y_max = -1;
};

/// Everything render_backward needs to replay a forward pass.
struct RenderState {
    CameraModel camera;
    RenderSettings settings;
    Vec3 background = Vec3::Zero();
    GaussianCloud cloud;
    std::vector<ProjectedGaussian> projected;  // ascending camera-space depth
    int tile_size = 16;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> tile_lists;  // indices into projected, depth order
    Image accum_depth;                                     // sum z_i w_i
    Image accum_alpha;                                     // sum w_i
};

struct RenderResult {
    Framebuffer frame;
    RenderState state;
};

RenderResult render(const GaussianCloud& cloud, const CameraModel& cam, const Vec3& background,
                    const RenderSettings& settings = {});

/// Hash of every pixel's contributor sequence and clamp decisions. Two
/// renders with equal signatures lie on the same smooth piece of the
/// (piecewise smooth) rendering function.
std::uint64_t blend_signature(const RenderState& state);

/// Reverse-mode pass through blending, projection, covariance and activations.
/// Throws std::invalid_argument if adjoint shapes do not match the render.
GradientBuffer render_backward(const RenderState& state, const Image& d_color, const Image& d_depth,
                               const Image& d_alpha);

}  // namespace binosplat
