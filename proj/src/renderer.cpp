// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/renderer.hpp"

#include "binosplat/parallel.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace binosplat {

GradientBuffer::GradientBuffer(std::size_t n)
    : d_positions(n, Vec3::Zero()),
      d_rotations(n, Vec4::Zero()),
      d_log_scales(n, Vec3::Zero()),
      d_opacity_logits(n, 0.0),
      d_colors(n, Vec3::Zero()),
      d_means2d(n, Vec2::Zero()),
      visible(n, 0) {}

GradientBuffer& GradientBuffer::operator+=(const GradientBuffer& other) {
    if (other.size() != size()) throw std::invalid_argument("gradient buffers differ in size");
    for (std::size_t i = 0; i < size(); ++i) {
        d_positions[i] += other.d_positions[i];
        d_rotations[i] += other.d_rotations[i];
        d_log_scales[i] += other.d_log_scales[i];
        d_opacity_logits[i] += other.d_opacity_logits[i];
        d_colors[i] += other.d_colors[i];
        d_means2d[i] += other.d_means2d[i];
        visible[i] = visible[i] | other.visible[i];
    }
    return *this;
}

bool GradientBuffer::all_finite() const {
    for (std::size_t i = 0; i < size(); ++i) {
        if (!d_positions[i].allFinite() || !d_rotations[i].allFinite() || !d_log_scales[i].allFinite() ||
            !std::isfinite(d_opacity_logits[i]) || !d_colors[i].allFinite() || !d_means2d[i].allFinite())
            return false;
    }
    return true;
}

namespace {

// Per-pixel blending record used by the backward replay.
struct Contribution {
    std::uint32_t slot;  // position within the tile list
    double a;            // effective alpha after clamp
    double gauss;        // exp(power)
    double transmittance;
    bool clamped;
};

inline double gaussian_power(const ProjectedGaussian& g, double dx, double dy) {
    return -0.5 * (g.conic(0, 0) * dx * dx + g.conic(1, 1) * dy * dy) - g.conic(0, 1) * dx * dy;
}

void project_all(RenderState& st) {
    const CameraModel& cam = st.camera;
    const auto& cloud = st.cloud;
    const RenderSettings& s = st.settings;

    st.projected.clear();
    st.projected.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        ProjectedGaussian g;
        g.index = static_cast<std::uint32_t>(i);
        g.p_cam = cam.to_camera(cloud.positions[i]);
        if (!(g.p_cam.z() > cam.near)) continue;
        g.opacity = sigmoid(cloud.opacity_logits[i]);
        if (!(g.opacity >= s.alpha_skip)) continue;  // can never pass the skip threshold

        g.sigma = build_covariance(cloud.rotations[i], cloud.log_scales[i]);
        g.jacobian = projection_jacobian(cam, g.p_cam);
        const Mat2 cov = project_covariance(g.sigma, cam.rotation, g.jacobian, s.dilation);
        const double det = cov.determinant();
        if (!(det > 0.0)) continue;
        g.conic = cov.inverse();
        g.conic(0, 1) = g.conic(1, 0) = 0.5 * (g.conic(0, 1) + g.conic(1, 0));
        const double iz = 1.0 / g.p_cam.z();
        g.mean = Vec2(cam.fx * g.p_cam.x() * iz + cam.cx, cam.fy * g.p_cam.y() * iz + cam.cy);
        g.rgb = sh_to_rgb(cloud.colors[i]);

        // Outside q_cut the splat's alpha is below the skip threshold everywhere.
        const double q_cut = 2.0 * std::log(g.opacity / s.alpha_skip);
        const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
        const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
        const double radius = std::sqrt(std::max(0.0, q_cut) * lambda_max) + 1.0;
        if (!std::isfinite(radius) || !g.mean.allFinite()) continue;
        g.x_min = static_cast<int>(std::max(0.0, std::ceil(g.mean.x() - radius)));
        g.x_max = static_cast<int>(std::min<double>(cam.width - 1, std::floor(g.mean.x() + radius)));
        g.y_min = static_cast<int>(std::max(0.0, std::ceil(g.mean.y() - radius)));
        g.y_max = static_cast<int>(std::min<double>(cam.height - 1, std::floor(g.mean.y() + radius)));
        if (g.x_min > g.x_max || g.y_min > g.y_max) continue;
        st.projected.push_back(g);
    }
    std::stable_sort(st.projected.begin(), st.projected.end(),
                     [](const ProjectedGaussian& a, const ProjectedGaussian& b) {
                         return a.p_cam.z() < b.p_cam.z();
                     });
}

void bin_tiles(RenderState& st) {
    const int W = st.camera.width;
    const int H = st.camera.height;
    st.tile_size = st.settings.use_tiles ? std::max(1, st.settings.tile_size) : std::max(W, H);
    st.tiles_x = (W + st.tile_size - 1) / st.tile_size;
    st.tiles_y = (H + st.tile_size - 1) / st.tile_size;
    st.tile_lists.assign(static_cast<std::size_t>(st.tiles_x) * st.tiles_y, {});
    for (std::uint32_t k = 0; k < st.projected.size(); ++k) {
        const auto& g = st.projected[k];
        if (!st.settings.use_tiles) {
            st.tile_lists[0].push_back(k);
            continue;
        }
        for (int ty = g.y_min / st.tile_size; ty <= g.y_max / st.tile_size; ++ty)
            for (int tx = g.x_min / st.tile_size; tx <= g.x_max / st.tile_size; ++tx)
                st.tile_lists[static_cast<std::size_t>(ty) * st.tiles_x + tx].push_back(k);
    }
}

// Front-to-back blend of one pixel. Calls record(contribution) for every splat
// that contributes; returns the final transmittance.
template <typename Record>
double blend_pixel(const RenderState& st, const std::vector<std::uint32_t>& list, int row, int col,
                   Record&& record) {
    const RenderSettings& s = st.settings;
    double T = 1.0;
    for (std::uint32_t slot = 0; slot < list.size(); ++slot) {
        const ProjectedGaussian& g = st.projected[list[slot]];
        const double dx = col - g.mean.x();
        const double dy = row - g.mean.y();
        const double power = gaussian_power(g, dx, dy);
        if (power > 0.0) continue;
        const double G = std::exp(power);
        const double raw = g.opacity * G;
        const bool clamped = raw > s.alpha_clamp;
        const double a = clamped ? s.alpha_clamp : raw;
        if (a < s.alpha_skip) continue;
        record(Contribution{slot, a, G, T, clamped});
        T *= (1.0 - a);
        if (T < s.transmittance_min) break;
    }
    return T;
}

}  // namespace

RenderResult render(const GaussianCloud& cloud, const CameraModel& cam, const Vec3& background,
                    const RenderSettings& settings) {
    RenderResult out;
    RenderState& st = out.state;
    st.camera = cam;
    st.settings = settings;
    st.background = background;
    st.cloud = cloud;
    project_all(st);
    bin_tiles(st);

    const int W = cam.width;
    const int H = cam.height;
    Framebuffer& fb = out.frame;
    fb.background = background;
    fb.color = Image(W, H, 3);
    fb.depth = Image(W, H, 1);
    fb.alpha = Image(W, H, 1);
    st.accum_depth = Image(W, H, 1);
    st.accum_alpha = Image(W, H, 1);

    parallel_for(st.tile_lists.size(), [&](std::size_t t) {
        const int tx = static_cast<int>(t) % st.tiles_x;
        const int ty = static_cast<int>(t) / st.tiles_x;
        const auto& list = st.tile_lists[t];
        for (int r = ty * st.tile_size; r < std::min(H, (ty + 1) * st.tile_size); ++r) {
            for (int c = tx * st.tile_size; c < std::min(W, (tx + 1) * st.tile_size); ++c) {
                Vec3 color = Vec3::Zero();
                double dn = 0.0;
                double acc = 0.0;
                const double T = blend_pixel(st, list, r, c, [&](const Contribution& k) {
                    const ProjectedGaussian& g = st.projected[list[k.slot]];
                    const double w = k.a * k.transmittance;
                    color += w * g.rgb;
                    dn += w * g.p_cam.z();
                    acc += w;
                });
                color += T * background;
                for (int ch = 0; ch < 3; ++ch) fb.color.at(r, c, ch) = color(ch);
                fb.alpha.at(r, c) = acc;
                fb.depth.at(r, c) = settings.normalize_depth ? dn / (acc + settings.depth_eps) : dn;
                st.accum_depth.at(r, c) = dn;
                st.accum_alpha.at(r, c) = acc;
            }
        }
    });
    return out;
}

std::uint64_t blend_signature(const RenderState& st) {
    std::uint64_t h = st.projected.size();
    auto mix = [&h](std::uint64_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
    for (const auto& g : st.projected) mix(g.index);
    for (std::size_t t = 0; t < st.tile_lists.size(); ++t) {
        const auto& list = st.tile_lists[t];
        const int tx = static_cast<int>(t) % st.tiles_x;
        const int ty = static_cast<int>(t) / st.tiles_x;
        for (int r = ty * st.tile_size; r < std::min(st.camera.height, (ty + 1) * st.tile_size); ++r)
            for (int c = tx * st.tile_size; c < std::min(st.camera.width, (tx + 1) * st.tile_size); ++c) {
                mix(0xffffffffULL);
                blend_pixel(st, list, r, c, [&](const Contribution& k) {
                    mix((static_cast<std::uint64_t>(st.projected[list[k.slot]].index) << 1) | k.clamped);
                });
            }
    }
    return h;
}

namespace {

// d(rotation matrix)/d(q_k) for a unit quaternion (w, x, y, z).
std::array<Mat3, 4> rotation_derivatives(const Vec4& q) {
    const double w = q(0), x = q(1), y = q(2), z = q(3);
    std::array<Mat3, 4> d;
    d[0] << 0, -z, y, z, 0, -x, -y, x, 0;
    d[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
    d[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
    d[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
    for (auto& m : d) m *= 2.0;
    return d;
}

// Screen-space gradient of one projected Gaussian.
struct ScreenGrad {
    Vec2 mean = Vec2::Zero();
    double conic00 = 0.0, conic01 = 0.0, conic11 = 0.0;
    double opacity = 0.0;
    Vec3 rgb = Vec3::Zero();
    double depth = 0.0;

    ScreenGrad& operator+=(const ScreenGrad& o) {
        mean += o.mean;
        conic00 += o.conic00;
        conic01 += o.conic01;
        conic11 += o.conic11;
        opacity += o.opacity;
        rgb += o.rgb;
        depth += o.depth;
        return *this;
    }
};

}  // namespace

GradientBuffer render_backward(const RenderState& st, const Image& d_color, const Image& d_depth,
                               const Image& d_alpha) {
    const int W = st.camera.width;
    const int H = st.camera.height;
    if (d_color.width != W || d_color.height != H || d_color.channels != 3)
        throw std::invalid_argument("render_backward: color adjoint must be HxWx3 matching the render");
    if (d_depth.width != W || d_depth.height != H || d_depth.channels != 1)
        throw std::invalid_argument("render_backward: depth adjoint must be HxWx1 matching the render");
    if (d_alpha.width != W || d_alpha.height != H || d_alpha.channels != 1)
        throw std::invalid_argument("render_backward: alpha adjoint must be HxWx1 matching the render");

    const RenderSettings& s = st.settings;
    std::vector<std::vector<ScreenGrad>> partials(st.tile_lists.size());

    parallel_for(st.tile_lists.size(), [&](std::size_t t) {
        const auto& list = st.tile_lists[t];
        auto& part = partials[t];
        part.assign(list.size(), ScreenGrad{});
        if (list.empty()) return;
        const int tx = static_cast<int>(t) % st.tiles_x;
        const int ty = static_cast<int>(t) / st.tiles_x;
        std::vector<Contribution> contribs;
        for (int r = ty * st.tile_size; r < std::min(H, (ty + 1) * st.tile_size); ++r) {
            for (int c = tx * st.tile_size; c < std::min(W, (tx + 1) * st.tile_size); ++c) {
                const Vec3 g_color(d_color.at(r, c, 0), d_color.at(r, c, 1), d_color.at(r, c, 2));
                double g_dn = d_depth.at(r, c);
                double g_acc = d_alpha.at(r, c);
                if (s.normalize_depth) {
                    const double denom = st.accum_alpha.at(r, c) + s.depth_eps;
                    g_acc -= d_depth.at(r, c) * st.accum_depth.at(r, c) / (denom * denom);
                    g_dn = d_depth.at(r, c) / denom;
                }
                if (g_color.isZero(0.0) && g_dn == 0.0 && g_acc == 0.0) continue;

                contribs.clear();
                const double T_final =
                    blend_pixel(st, list, r, c, [&](const Contribution& k) { contribs.push_back(k); });

                // Loss = sum_i f_i a_i T_i + f_bg T_final.
                double downstream = g_color.dot(st.background) * T_final;
                for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
                    const ProjectedGaussian& g = st.projected[list[it->slot]];
                    ScreenGrad& sg = part[it->slot];
                    const double w = it->a * it->transmittance;
                    const double f = g_color.dot(g.rgb) + g_dn * g.p_cam.z() + g_acc;
                    const double d_a = f * it->transmittance - downstream / (1.0 - it->a);
                    downstream += f * w;

                    sg.rgb += w * g_color;
                    sg.depth += w * g_dn;
                    if (it->clamped) continue;
                    sg.opacity += d_a * it->gauss;
                    const double d_power = d_a * g.opacity * it->gauss;
                    const double dx = c - g.mean.x();
                    const double dy = r - g.mean.y();
                    sg.mean.x() += d_power * (g.conic(0, 0) * dx + g.conic(0, 1) * dy);
                    sg.mean.y() += d_power * (g.conic(0, 1) * dx + g.conic(1, 1) * dy);
                    sg.conic00 += -0.5 * d_power * dx * dx;
                    sg.conic01 += -d_power * dx * dy;
                    sg.conic11 += -0.5 * d_power * dy * dy;
                }
            }
        }
    });

    // Fixed tile order keeps the reduction independent of the worker count.
    std::vector<ScreenGrad> screen(st.projected.size());
    for (std::size_t t = 0; t < st.tile_lists.size(); ++t) {
        const auto& list = st.tile_lists[t];
        for (std::size_t slot = 0; slot < list.size(); ++slot) screen[list[slot]] += partials[t][slot];
    }

    GradientBuffer grads(st.cloud.size());
    const CameraModel& cam = st.camera;
    const Mat3& Wr = cam.rotation;
    for (std::size_t k = 0; k < st.projected.size(); ++k) {
        const ProjectedGaussian& g = st.projected[k];
        const ScreenGrad& sg = screen[k];
        const std::size_t i = g.index;
        grads.visible[i] = 1;
        grads.d_means2d[i] = sg.mean;

        const Vec3 sh = st.cloud.colors[i];
        for (int ch = 0; ch < 3; ++ch)
            grads.d_colors[i](ch) = (kShC0 * sh(ch) + 0.5 > 0.0) ? kShC0 * sg.rgb(ch) : 0.0;
        grads.d_opacity_logits[i] = sg.opacity * g.opacity * (1.0 - g.opacity);

        const double tx = g.p_cam.x(), ty = g.p_cam.y(), tz = g.p_cam.z();
        const double iz = 1.0 / tz, iz2 = iz * iz, iz3 = iz2 * iz;
        Vec3 d_t(0.0, 0.0, sg.depth);
        d_t.x() += sg.mean.x() * cam.fx * iz;
        d_t.y() += sg.mean.y() * cam.fy * iz;
        d_t.z() += -sg.mean.x() * cam.fx * tx * iz2 - sg.mean.y() * cam.fy * ty * iz2;

        // conic -> 2D covariance
        Mat2 g_conic;
        g_conic << sg.conic00, 0.5 * sg.conic01, 0.5 * sg.conic01, sg.conic11;
        const Mat2 g_cov = -g.conic * g_conic * g.conic;

        // 2D covariance = T Sigma T^T + dilation, T = J W
        const Mat23 T = g.jacobian * Wr;
        const Mat3 g_sigma = T.transpose() * g_cov * T;
        const Mat23 g_T = 2.0 * g_cov * T * g.sigma;
        const Mat23 g_J = g_T * Wr.transpose();
        d_t.x() += g_J(0, 2) * (-cam.fx * iz2);
        d_t.y() += g_J(1, 2) * (-cam.fy * iz2);
        d_t.z() += g_J(0, 0) * (-cam.fx * iz2) + g_J(0, 2) * (2.0 * cam.fx * tx * iz3) +
                   g_J(1, 1) * (-cam.fy * iz2) + g_J(1, 2) * (2.0 * cam.fy * ty * iz3);
        grads.d_positions[i] = Wr.transpose() * d_t;

        // Sigma = M M^T, M = R S
        const Vec4 q_raw = st.cloud.rotations[i];
        const double q_norm = q_raw.norm();
        const Vec4 q = q_raw / q_norm;
        const Mat3 R = quaternion_to_rotation(q);
        const Vec3 scale = st.cloud.log_scales[i].array().exp();
        const Mat3 M = R * scale.asDiagonal();
        const Mat3 g_M = 2.0 * g_sigma * M;
        const Mat3 Rt_gM = R.transpose() * g_M;
        for (int d = 0; d < 3; ++d) grads.d_log_scales[i](d) = Rt_gM(d, d) * scale(d);
        const Mat3 g_R = g_M * scale.asDiagonal();
        const auto dR = rotation_derivatives(q);
        Vec4 g_q;
        for (int d = 0; d < 4; ++d) g_q(d) = (g_R.array() * dR[d].array()).sum();
        grads.d_rotations[i] = (g_q - q * q.dot(g_q)) / q_norm;
    }
    return grads;
}

}  // namespace binosplat
