// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/camera.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace binosplat {

void CameraModel::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("camera focal lengths must be positive");
    if (!(near > 0.0)) throw std::invalid_argument("camera near plane must be positive");
    if (width < 1 || height < 1) throw std::invalid_argument("camera image size must be at least 1x1");
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho < 1e-9) || rotation.determinant() < 0.0)
        throw std::invalid_argument("camera rotation is not a proper orthonormal matrix");
    if (!translation.allFinite()) throw std::invalid_argument("camera translation is not finite");
}

CameraModel look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint, double fx, double fy,
                    int width, int height) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = (-up_hint).cross(forward);
    if (right.norm() < 1e-12) throw std::invalid_argument("look_at: up hint parallel to view direction");
    right.normalize();
    const Vec3 down = forward.cross(right);

    CameraModel cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.width = width;
    cam.height = height;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    return cam;
}

Projection project_point(const CameraModel& cam, const Vec3& world) {
    const Vec3 p = cam.to_camera(world);
    Projection out;
    out.depth = p.z();
    if (!(p.z() > cam.near)) return out;
    out.pixel = Vec2(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
    out.valid = true;
    return out;
}

Mat23 projection_jacobian(const CameraModel& cam, const Vec3& p_cam) {
    assert(p_cam.z() > cam.near);
    const double iz = 1.0 / p_cam.z();
    Mat23 J;
    J << cam.fx * iz, 0.0, -cam.fx * p_cam.x() * iz * iz,
         0.0, cam.fy * iz, -cam.fy * p_cam.y() * iz * iz;
    return J;
}

CameraModel translate_camera(const CameraModel& cam, double d_cam) {
    CameraModel out = cam;
    if (d_cam != 0.0) out.translation.x() -= d_cam;
    return out;
}

namespace {

Eigen::Matrix<double, 3, 4> projection_matrix(const CameraModel& cam) {
    Mat3 K = Mat3::Identity();
    K(0, 0) = cam.fx;
    K(1, 1) = cam.fy;
    K(0, 2) = cam.cx;
    K(1, 2) = cam.cy;
    Eigen::Matrix<double, 3, 4> Rt;
    Rt.leftCols<3>() = cam.rotation;
    Rt.col(3) = cam.translation;
    return K * Rt;
}

}  // namespace

Triangulation triangulate(const CameraModel& cam_a, const CameraModel& cam_b, const Match& match,
                          double max_reprojection_px) {
    const auto Pa = projection_matrix(cam_a);
    const auto Pb = projection_matrix(cam_b);

    Eigen::Matrix4d A;
    A.row(0) = match.x_a * Pa.row(2) - Pa.row(0);
    A.row(1) = match.y_a * Pa.row(2) - Pa.row(1);
    A.row(2) = match.x_b * Pb.row(2) - Pb.row(0);
    A.row(3) = match.y_b * Pb.row(2) - Pb.row(1);
    // Row scaling keeps the smallest singular vector well conditioned.
    for (int r = 0; r < 4; ++r) {
        const double n = A.row(r).norm();
        if (n > 0.0) A.row(r) /= n;
    }

    Triangulation out;
    const Eigen::JacobiSVD<Eigen::Matrix4d> svd(A, Eigen::ComputeFullV);
    const Eigen::Vector4d X = svd.matrixV().col(3);
    if (!X.allFinite() || std::abs(X(3)) < 1e-12) return out;  // point at infinity: parallel rays
    out.point = X.head<3>() / X(3);

    const Projection pa = project_point(cam_a, out.point);
    const Projection pb = project_point(cam_b, out.point);
    if (!pa.valid || !pb.valid) return out;
    const double ea = (pa.pixel - Vec2(match.x_a, match.y_a)).norm();
    const double eb = (pb.pixel - Vec2(match.x_b, match.y_b)).norm();
    out.reprojection_error = std::max(ea, eb);
    out.valid = out.point.allFinite() && out.reprojection_error <= max_reprojection_px;
    return out;
}

}  // namespace binosplat
