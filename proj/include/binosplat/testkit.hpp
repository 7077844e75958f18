// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binosplat/camera.hpp"
#include "binosplat/consistency.hpp"
#include "binosplat/gaussian_cloud.hpp"
#include "binosplat/renderer.hpp"
#include "binosplat/scene_io.hpp"
#include "binosplat/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace binosplat::testkit {

enum class SceneKind { TexturedPlane, TwoLayer, RandomBlobCloud };

SceneKind parse_scene_kind(const std::string& name);
std::string scene_kind_name(SceneKind kind);

/// Forward-facing synthetic scene: cameras on a ring of `ring_radius` in the
/// z = 0 plane, all looking at (0, 0, look_at_depth).
struct SyntheticSceneSpec {
    SceneKind kind = SceneKind::TexturedPlane;
    std::size_t n_gaussians = 1600;  // approximate for plane kinds (rounded to a grid)
    int camera_count = 5;
    int train_count = 3;
    double ring_radius = 0.6;
    double look_at_depth = 5.0;
    int width = 48;
    int height = 48;
    double focal = 56.0;
    double texture_frequency = 1.2;  // cycles per scene unit
    double plane_depth = 5.0;        // background plane
    double front_depth = 3.0;        // two-layer foreground patch
    double front_half_size = 0.55;
    std::uint64_t seed = 7;
};

struct Box {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();
    bool contains(const Vec3& p) const { return (p.array() >= min.array()).all() && (p.array() <= max.array()).all(); }
};

struct SyntheticScene {
    SyntheticSceneSpec spec;
    GaussianCloud gt;
    std::vector<std::string> camera_ids;
    std::vector<View> train;   // GT color (8-bit), depth (float32) and coverage
    std::vector<View> test;
    std::vector<Vec3> surface_samples;  // points on the visible surfaces, with their GT colors
    std::vector<Vec3> surface_colors;
    Box scene_box;    // volume containing all GT content
    Box floater_box;  // empty region between the cameras and the nearest surface
};

SyntheticScene make_scene(const SyntheticSceneSpec& spec);

/// Renders GT color/depth/alpha of `cloud` for a camera, quantized like the on-disk formats.
View render_view(const GaussianCloud& cloud, const std::string& id, const CameraModel& cam);

/// Writes scene.json, images/, depths/, gt.ply, a sparse point PLY and
/// correspondences for all train-view pairs.
SceneBundle write_scene(const SyntheticScene& scene, const std::filesystem::path& dir, double noise_px = 0.5,
                        double outlier_rate = 0.0);

/// Matches between two views: exact projections of the samples visible in both
/// plus N(0, noise_px) pixel noise; a fraction `outlier_rate` get a uniformly
/// random location in view b and confidence 0.1 (inliers 0.9). When depth maps
/// are given, samples occluded in either view (depth disagreement > 2%) are dropped.
CorrespondenceSet fabricate_correspondences(const std::vector<Vec3>& samples, const std::string& id_a,
                                            const CameraModel& cam_a, const std::string& id_b,
                                            const CameraModel& cam_b, double noise_px, double outlier_rate,
                                            Rng& rng, const Image* depth_a = nullptr, const Image* depth_b = nullptr);

/// Correspondences for every pair of `views`, using their GT depth for visibility.
std::vector<CorrespondenceSet> fabricate_all_pairs(const SyntheticScene& scene, const std::vector<View>& views,
                                                   double noise_px, double outlier_rate, Rng& rng);

/// Adds `count` random low-opacity Gaussians inside `box`.
void plant_floaters(GaussianCloud& cloud, const Box& box, std::size_t count, Rng& rng);

std::size_t count_inside(const GaussianCloud& cloud, const Box& box);

/// Scalar loss of a cloud; returns the loss value.
using LossClosure = std::function<double(const GaussianCloud&)>;

struct FiniteDiffOptions {
    double step = 1e-4;
    /// Signature of the piecewise-smooth branch an evaluation lies on; probes whose
    /// +/- evaluations disagree are retried with a 10x smaller step.
    std::function<std::uint64_t(const GaussianCloud&)> branch;
    int max_refinements = 2;
};

struct FiniteDiffResult {
    GradientBuffer grads;
    std::size_t refined = 0;     // probes that needed a smaller step
    std::size_t unresolved = 0;  // probes that still straddled a branch boundary
    std::vector<std::uint8_t> unresolved_mask;  // per flattened parameter (14 per Gaussian)
};

/// Central differences of `loss` with respect to every raw parameter.
FiniteDiffResult finite_diff_gradients(const GaussianCloud& cloud, const LossClosure& loss,
                                       const FiniteDiffOptions& options = {});

/// Flattened view of a gradient buffer in optimizer parameter order (14 per Gaussian).
std::vector<double> flatten(const GradientBuffer& g);

/// Random cloud of `n` Gaussians in view of `cam`, opacities in [0.2, 0.8].
GaussianCloud random_cloud(std::size_t n, const CameraModel& cam, Rng& rng);

}  // namespace binosplat::testkit
