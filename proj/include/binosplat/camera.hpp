// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace binosplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Pinhole camera with a world-to-camera pose.
///
/// Camera frame is +x right, +y down, +z forward. Pixel (u, v) addresses
/// column u and row v; pixel centers sit on integer coordinates.
struct CameraModel {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double near = 0.01;

    Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
    Vec3 optical_center() const { return -rotation.transpose() * translation; }

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;
};

/// Builds a camera at `eye` looking at `target`; `up_hint` is the world
/// direction that should appear as image-up (camera -y).
CameraModel look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint, double fx, double fy,
                    int width, int height);

struct Projection {
    Vec2 pixel = Vec2::Zero();
    double depth = 0.0;
    bool valid = false;
};

Projection project_point(const CameraModel& cam, const Vec3& world);

/// d(pixel)/d(camera-space point). Requires p_cam.z() > cam.near.
Mat23 projection_jacobian(const CameraModel& cam, const Vec3& p_cam);

/// Moves the optical center by `d_cam` along the camera's own +x axis.
CameraModel translate_camera(const CameraModel& cam, double d_cam);

struct Match {
    double x_a = 0.0;
    double y_a = 0.0;
    double x_b = 0.0;
    double y_b = 0.0;
    double confidence = 1.0;
};

struct CorrespondenceSet {
    std::string view_a;
    std::string view_b;
    std::vector<Match> matches;
};

struct TriangulationGates {
    double max_reprojection_px = 2.0;
    double min_confidence = 0.5;
};

struct Triangulation {
    Vec3 point = Vec3::Zero();
    double reprojection_error = 0.0;  // max over the two views, pixels
    bool valid = false;
};

/// Linear two-view DLT triangulation with cheirality and reprojection gates.
Triangulation triangulate(const CameraModel& cam_a, const CameraModel& cam_b, const Match& match,
                          double max_reprojection_px = 2.0);

}  // namespace binosplat
