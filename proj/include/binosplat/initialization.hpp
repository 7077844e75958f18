// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binosplat/camera.hpp"
#include "binosplat/consistency.hpp"
#include "binosplat/gaussian_cloud.hpp"
#include "binosplat/image.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace binosplat {

enum class InitMode { DenseTriangulated, SparsePly, Random };

struct InitSpec {
    InitMode mode = InitMode::DenseTriangulated;
    std::string ply_path;             // sparse-ply
    std::string correspondence_path;  // dense-triangulated
    std::size_t random_count = 1000;
    Vec3 box_min = Vec3::Constant(-1.0);
    Vec3 box_max = Vec3::Constant(1.0);
    TriangulationGates gates;
};

class InitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kInitialOpacity = 0.1;

/// Gaussians at `points` with the shared defaults: isotropic scale from the mean
/// distance to the 3 nearest neighbours, opacity 0.1, identity rotation.
GaussianCloud cloud_from_points(const std::vector<Vec3>& points, const std::vector<Vec3>& rgbs);

/// Bilinear color lookup at a sub-pixel location, clamped to the image.
Vec3 sample_color(const Image& image, double x, double y);

/// Triangulates every correspondence set and unions the surviving points.
GaussianCloud init_dense(const std::map<std::string, CameraModel>& cameras,
                         const std::map<std::string, Image>& images,
                         const std::vector<CorrespondenceSet>& correspondence_sets, const TriangulationGates& gates);

GaussianCloud init_random(std::size_t count, const Vec3& box_min, const Vec3& box_max, Rng& rng);

/// Axis-aligned box around the image-corner rays of every camera between camera depths `near` and `far`.
std::pair<Vec3, Vec3> frustum_bounds(const std::vector<CameraModel>& cameras, double near, double far);

/// One Gaussian per vertex of a point PLY (x, y, z and optional red, green, blue).
GaussianCloud init_sparse_from_bytes(const std::string& ply_bytes);
GaussianCloud init_sparse(const std::string& ply_path);

}  // namespace binosplat
