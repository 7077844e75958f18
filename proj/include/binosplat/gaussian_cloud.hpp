// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binosplat/camera.hpp"

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace binosplat {

/// Degree-0 spherical harmonic basis constant.
inline constexpr double kShC0 = 0.28209479177387814;

/// Optimizable Gaussians, stored as raw (pre-activation) parameters.
///
/// Opacity is a logit, scale is a log, rotation is an unnormalized
/// quaternion (w, x, y, z), color is the SH DC coefficient.
struct GaussianCloud {
    std::vector<Vec3> positions;
    std::vector<Vec4> rotations;
    std::vector<Vec3> log_scales;
    std::vector<double> opacity_logits;
    std::vector<Vec3> colors;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }

    void resize(std::size_t n);
    void reserve(std::size_t n);
    void push_back(const Vec3& position, const Vec4& rotation, const Vec3& log_scale, double opacity_logit,
                   const Vec3& color);
    /// Appends Gaussian `i` of `other`.
    void append_from(const GaussianCloud& other, std::size_t i);

    /// Throws std::invalid_argument if arrays disagree in length or hold non-finite values.
    void validate() const;

    bool operator==(const GaussianCloud&) const = default;
};

struct ActivatedGaussian {
    Vec3 position;
    Mat3 rotation;
    Vec3 scale;
    double opacity;
    Vec3 rgb;
};

double sigmoid(double x);
double logit(double p);

Vec3 sh_to_rgb(const Vec3& feature);
Vec3 rgb_to_sh(const Vec3& rgb);

Mat3 quaternion_to_rotation(const Vec4& q);

ActivatedGaussian activated(const GaussianCloud& cloud, std::size_t index);

/// Sigma = R S S^T R^T.
Mat3 build_covariance(const Vec4& quat, const Vec3& log_scale);

inline constexpr double kLowPassDilation = 0.3;

/// J W Sigma W^T J^T with `dilation` added to the diagonal.
Mat2 project_covariance(const Mat3& sigma, const Mat3& view_rotation, const Mat23& jacobian,
                        double dilation = kLowPassDilation);

class PlyError : public std::runtime_error {
public:
    enum class Kind { Header, Format, Properties, Truncated, Io };
    PlyError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Binary little-endian PLY in the common 3DGS vertex layout. Values are
/// written as 32-bit floats; clouds whose values are float-representable
/// round-trip bit-exactly.
std::string save_ply(const GaussianCloud& cloud);
GaussianCloud load_ply(const std::string& bytes);

void write_ply_file(const std::string& path, const GaussianCloud& cloud);
GaussianCloud read_ply_file(const std::string& path);

/// Property table of the first "vertex" element of an ascii or
/// binary_little_endian PLY; values converted to double.
struct PlyVertexTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
    int column(const std::string& name) const;
};

PlyVertexTable parse_ply_vertices(const std::string& bytes);

/// Rounds every parameter through a 32-bit float, i.e. what a save/load cycle yields.
GaussianCloud quantize_to_float(const GaussianCloud& cloud);

}  // namespace binosplat
