// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/testkit.hpp"

#include "binosplat/initialization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace binosplat::testkit {

namespace fs = std::filesystem;

SceneKind parse_scene_kind(const std::string& name) {
    if (name == "textured-plane") return SceneKind::TexturedPlane;
    if (name == "two-layer") return SceneKind::TwoLayer;
    if (name == "random-blob-cloud") return SceneKind::RandomBlobCloud;
    throw std::invalid_argument("unknown scene kind '" + name + "'");
}

std::string scene_kind_name(SceneKind kind) {
    switch (kind) {
        case SceneKind::TexturedPlane: return "textured-plane";
        case SceneKind::TwoLayer: return "two-layer";
        case SceneKind::RandomBlobCloud: return "random-blob-cloud";
    }
    return "unknown";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec3 background_texture(double x, double y, double freq) {
    return Vec3(0.5 + 0.35 * std::sin(kTwoPi * freq * x) * std::cos(kTwoPi * freq * 0.8 * y),
                0.5 + 0.35 * std::sin(kTwoPi * freq * 0.7 * x + 1.0) * std::sin(kTwoPi * freq * y + 0.5),
                0.5 + 0.3 * std::cos(kTwoPi * freq * 1.3 * (x + y) + 2.0));
}

Vec3 front_texture(double x, double y, double freq) {
    const double f = 1.7 * freq;
    return Vec3(0.55 + 0.35 * std::cos(kTwoPi * f * x + 0.3),
                0.45 + 0.35 * std::sin(kTwoPi * f * (x - y)),
                0.5 + 0.35 * std::sin(kTwoPi * f * y + 1.2));
}

// Grid of flat Gaussians on the plane z = depth covering [-half, half]^2.
void add_sheet(GaussianCloud& cloud, std::vector<Vec3>& samples, std::vector<Vec3>& sample_colors, double depth,
               double half, std::size_t n, double freq, bool front, Rng& rng, std::size_t n_samples) {
    const int side = std::max(2, static_cast<int>(std::lround(std::sqrt(static_cast<double>(n)))));
    const double spacing = 2.0 * half / (side - 1);
    const double sigma = 0.6 * spacing;
    const Vec3 log_scale(std::log(sigma), std::log(sigma), std::log(0.02 * spacing));
    for (int iy = 0; iy < side; ++iy)
        for (int ix = 0; ix < side; ++ix) {
            const double x = -half + ix * spacing;
            const double y = -half + iy * spacing;
            const Vec3 rgb = front ? front_texture(x, y, freq) : background_texture(x, y, freq);
            cloud.push_back(Vec3(x, y, depth), Vec4(1, 0, 0, 0), log_scale, logit(0.95), rgb_to_sh(rgb));
        }
    std::uniform_real_distribution<double> u(-half + spacing, half - spacing);
    for (std::size_t k = 0; k < n_samples; ++k) {
        const double x = u(rng), y = u(rng);
        samples.emplace_back(x, y, depth);
        sample_colors.push_back(front ? front_texture(x, y, freq) : background_texture(x, y, freq));
    }
}

// Half extent of the plane region seen by any camera at `depth`.
double visible_half_extent(const SyntheticSceneSpec& s, double depth) {
    const double half_fov = 0.5 * std::max(s.width, s.height) / s.focal;
    return depth * half_fov + s.ring_radius + 0.3;
}

Vec4 random_quaternion(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4 q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized();
}

}  // namespace

View render_view(const GaussianCloud& cloud, const std::string& id, const CameraModel& cam) {
    const RenderResult r = render(cloud, cam, Vec3::Zero());
    View v;
    v.id = id;
    v.camera = cam;
    v.image = quantize_8bit(r.frame.color);
    v.depth = quantize_float(r.frame.depth);
    v.alpha = r.frame.alpha;
    return v;
}

SyntheticScene make_scene(const SyntheticSceneSpec& spec) {
    if (spec.n_gaussians < 1) throw std::invalid_argument("make_scene: n_gaussians must be at least 1");
    if (spec.camera_count < 2) throw std::invalid_argument("make_scene: at least two cameras are required");
    if (spec.train_count < 1 || spec.train_count > spec.camera_count)
        throw std::invalid_argument("make_scene: train_count must lie in [1, camera_count]");

    SyntheticScene scene;
    scene.spec = spec;
    Rng rng(spec.seed);

    switch (spec.kind) {
        case SceneKind::TexturedPlane: {
            const double half = visible_half_extent(spec, spec.plane_depth);
            add_sheet(scene.gt, scene.surface_samples, scene.surface_colors, spec.plane_depth, half,
                      spec.n_gaussians, spec.texture_frequency, false, rng, 600);
            scene.scene_box = Box{Vec3(-half, -half, spec.plane_depth - 0.1), Vec3(half, half, spec.plane_depth + 0.1)};
            scene.floater_box = Box{Vec3(-0.6 * half, -0.6 * half, 1.5), Vec3(0.6 * half, 0.6 * half, spec.plane_depth - 1.5)};
            break;
        }
        case SceneKind::TwoLayer: {
            const double half = visible_half_extent(spec, spec.plane_depth);
            const double front_area = 4.0 * spec.front_half_size * spec.front_half_size;
            const double back_area = 4.0 * half * half;
            const auto n_front = static_cast<std::size_t>(
                std::max(4.0, spec.n_gaussians * front_area / (front_area + back_area) * 2.0));
            const std::size_t n_back = spec.n_gaussians > n_front ? spec.n_gaussians - n_front : 4;
            add_sheet(scene.gt, scene.surface_samples, scene.surface_colors, spec.plane_depth, half, n_back,
                      spec.texture_frequency, false, rng, 600);
            add_sheet(scene.gt, scene.surface_samples, scene.surface_colors, spec.front_depth, spec.front_half_size,
                      n_front, spec.texture_frequency, true, rng, 200);
            scene.scene_box = Box{Vec3(-half, -half, spec.front_depth - 0.1), Vec3(half, half, spec.plane_depth + 0.1)};
            const double fh = 0.8 * visible_half_extent(spec, spec.front_depth - 1.0) - spec.ring_radius;
            scene.floater_box = Box{Vec3(-fh, -fh, 1.2), Vec3(fh, fh, spec.front_depth - 0.8)};
            break;
        }
        case SceneKind::RandomBlobCloud: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            const double zmin = 0.6 * spec.look_at_depth, zmax = 1.2 * spec.look_at_depth;
            const double half = 0.5 * zmin * std::min(spec.width, spec.height) / spec.focal;
            for (std::size_t i = 0; i < spec.n_gaussians; ++i) {
                const Vec3 p(-half + 2 * half * u(rng), -half + 2 * half * u(rng), zmin + (zmax - zmin) * u(rng));
                const Vec3 ls = Vec3::Constant(std::log(0.08 * spec.look_at_depth / 5.0)) +
                                Vec3(u(rng), u(rng), u(rng)) * 0.6;
                const Vec3 rgb(0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng));
                scene.gt.push_back(p, random_quaternion(rng), ls, logit(0.5 + 0.4 * u(rng)), rgb_to_sh(rgb));
                scene.surface_samples.push_back(p);
                scene.surface_colors.push_back(rgb);
            }
            scene.scene_box = Box{Vec3(-half, -half, zmin) - Vec3::Constant(0.5), Vec3(half, half, zmax) + Vec3::Constant(0.5)};
            scene.floater_box = Box{Vec3(-0.5 * half, -0.5 * half, 1.0), Vec3(0.5 * half, 0.5 * half, zmin - 0.5)};
            break;
        }
    }

    // Train views take alternate ring positions so held-out views fall between them.
    std::vector<int> order;
    for (int k = 0; k < spec.camera_count; k += 2) order.push_back(k);
    for (int k = 1; k < spec.camera_count; k += 2) order.push_back(k);
    // The PLY stores floats, so ground truth is rendered from the float-rounded cloud.
    scene.gt = quantize_to_float(scene.gt);
    const Vec3 target(0.0, 0.0, spec.look_at_depth);
    for (int rank = 0; rank < spec.camera_count; ++rank) {
        const int k = order[rank];
        const double angle = kTwoPi * k / spec.camera_count;
        const Vec3 eye(spec.ring_radius * std::cos(angle), spec.ring_radius * std::sin(angle), 0.0);
        const CameraModel cam = look_at(eye, target, Vec3(0, -1, 0), spec.focal, spec.focal, spec.width, spec.height);
        const std::string id = "cam" + std::to_string(k);
        View v = render_view(scene.gt, id, cam);
        (rank < spec.train_count ? scene.train : scene.test).push_back(std::move(v));
    }
    for (const auto& v : scene.train) scene.camera_ids.push_back(v.id);
    for (const auto& v : scene.test) scene.camera_ids.push_back(v.id);
    return scene;
}

CorrespondenceSet fabricate_correspondences(const std::vector<Vec3>& samples, const std::string& id_a,
                                            const CameraModel& cam_a, const std::string& id_b,
                                            const CameraModel& cam_b, double noise_px, double outlier_rate,
                                            Rng& rng, const Image* depth_a, const Image* depth_b) {
    CorrespondenceSet set;
    set.view_a = id_a;
    set.view_b = id_b;
    std::normal_distribution<double> noise(0.0, noise_px > 0.0 ? noise_px : 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto inside = [](const CameraModel& c, const Vec2& px) {
        return px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= c.width - 1 && px.y() <= c.height - 1;
    };
    auto visible = [](const Image* depth, const Vec2& px, double z) {
        if (!depth) return true;
        const double d = depth->at(static_cast<int>(std::lround(px.y())), static_cast<int>(std::lround(px.x())));
        return std::abs(d - z) <= 0.02 * z;
    };
    for (const Vec3& p : samples) {
        const Projection pa = project_point(cam_a, p);
        const Projection pb = project_point(cam_b, p);
        if (!pa.valid || !pb.valid || !inside(cam_a, pa.pixel) || !inside(cam_b, pb.pixel)) continue;
        if (!visible(depth_a, pa.pixel, pa.depth) || !visible(depth_b, pb.pixel, pb.depth)) continue;
        Match m{pa.pixel.x(), pa.pixel.y(), pb.pixel.x(), pb.pixel.y(), 0.9};
        if (noise_px > 0.0) {
            m.x_a += noise(rng);
            m.y_a += noise(rng);
            m.x_b += noise(rng);
            m.y_b += noise(rng);
        }
        if (outlier_rate > 0.0 && unit(rng) < outlier_rate) {
            m.x_b = unit(rng) * (cam_b.width - 1);
            m.y_b = unit(rng) * (cam_b.height - 1);
            m.confidence = 0.1;
        }
        m.x_a = std::clamp(m.x_a, 0.0, cam_a.width - 1.0);
        m.y_a = std::clamp(m.y_a, 0.0, cam_a.height - 1.0);
        m.x_b = std::clamp(m.x_b, 0.0, cam_b.width - 1.0);
        m.y_b = std::clamp(m.y_b, 0.0, cam_b.height - 1.0);
        set.matches.push_back(m);
    }
    return set;
}

std::vector<CorrespondenceSet> fabricate_all_pairs(const SyntheticScene& scene, const std::vector<View>& views,
                                                   double noise_px, double outlier_rate, Rng& rng) {
    std::vector<CorrespondenceSet> sets;
    for (std::size_t a = 0; a < views.size(); ++a)
        for (std::size_t b = a + 1; b < views.size(); ++b)
            sets.push_back(fabricate_correspondences(scene.surface_samples, views[a].id, views[a].camera, views[b].id,
                                                     views[b].camera, noise_px, outlier_rate, rng,
                                                     views[a].depth ? &*views[a].depth : nullptr,
                                                     views[b].depth ? &*views[b].depth : nullptr));
    return sets;
}

SceneBundle write_scene(const SyntheticScene& scene, const fs::path& dir, double noise_px, double outlier_rate) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "depths");
    SceneBundle bundle;
    bundle.root = dir;
    auto emit = [&](const View& v) {
        bundle.camera_ids.push_back(v.id);
        bundle.cameras[v.id] = v.camera;
        bundle.images[v.id] = "images/" + v.id + ".png";
        bundle.depths[v.id] = "depths/" + v.id + ".pfm";
        write_png(dir / bundle.images[v.id], v.image);
        write_pfm(dir / bundle.depths[v.id], *v.depth);
    };
    for (const auto& v : scene.train) {
        emit(v);
        bundle.train_ids.push_back(v.id);
    }
    for (const auto& v : scene.test) {
        emit(v);
        bundle.test_ids.push_back(v.id);
    }
    write_ply_file((dir / "gt.ply").string(), quantize_to_float(scene.gt));

    // Sparse point cloud: every fourth surface sample, colors as 8-bit.
    std::ostringstream ply;
    std::size_t count = 0;
    for (std::size_t i = 0; i < scene.surface_samples.size(); i += 4) ++count;
    ply << "ply\nformat ascii 1.0\nelement vertex " << count
        << "\nproperty float x\nproperty float y\nproperty float z\n"
           "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    ply.precision(9);
    for (std::size_t i = 0; i < scene.surface_samples.size(); i += 4) {
        const Vec3& p = scene.surface_samples[i];
        const Vec3 c = (scene.surface_colors[i].array().min(1.0).max(0.0) * 255.0).round();
        ply << p.x() << " " << p.y() << " " << p.z() << " " << static_cast<int>(c.x()) << " "
            << static_cast<int>(c.y()) << " " << static_cast<int>(c.z()) << "\n";
    }
    write_text_file(dir / "sparse.ply", ply.str());
    bundle.init_ply = "sparse.ply";

    Rng rng(scene.spec.seed ^ 0x5eedULL);
    write_text_file(dir / "correspondences.json",
                    format_correspondences(fabricate_all_pairs(scene, scene.train, noise_px, outlier_rate, rng)));
    bundle.correspondences = "correspondences.json";
    write_scene_manifest(bundle);
    return bundle;
}

void plant_floaters(GaussianCloud& cloud, const Box& box, std::size_t count, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> pts(count), rgbs(count);
    for (std::size_t i = 0; i < count; ++i) {
        for (int d = 0; d < 3; ++d) pts[i](d) = box.min(d) + u(rng) * (box.max(d) - box.min(d));
        rgbs[i] = Vec3(u(rng), u(rng), u(rng));
    }
    const GaussianCloud floaters = cloud_from_points(pts, rgbs);
    for (std::size_t i = 0; i < floaters.size(); ++i) cloud.append_from(floaters, i);
}

std::size_t count_inside(const GaussianCloud& cloud, const Box& box) {
    std::size_t n = 0;
    for (const auto& p : cloud.positions) n += box.contains(p);
    return n;
}

std::vector<double> flatten(const GradientBuffer& g) {
    std::vector<double> out;
    out.reserve(g.size() * 14);
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (int d = 0; d < 3; ++d) out.push_back(g.d_positions[i](d));
        for (int d = 0; d < 4; ++d) out.push_back(g.d_rotations[i](d));
        for (int d = 0; d < 3; ++d) out.push_back(g.d_log_scales[i](d));
        out.push_back(g.d_opacity_logits[i]);
        for (int d = 0; d < 3; ++d) out.push_back(g.d_colors[i](d));
    }
    return out;
}

namespace {

double& parameter(GaussianCloud& c, std::size_t i, int k) {
    if (k < 3) return c.positions[i](k);
    if (k < 7) return c.rotations[i](k - 3);
    if (k < 10) return c.log_scales[i](k - 7);
    if (k == 10) return c.opacity_logits[i];
    return c.colors[i](k - 11);
}

void set_gradient(GradientBuffer& g, std::size_t i, int k, double v) {
    if (k < 3) g.d_positions[i](k) = v;
    else if (k < 7) g.d_rotations[i](k - 3) = v;
    else if (k < 10) g.d_log_scales[i](k - 7) = v;
    else if (k == 10) g.d_opacity_logits[i] = v;
    else g.d_colors[i](k - 11) = v;
}

}  // namespace

FiniteDiffResult finite_diff_gradients(const GaussianCloud& cloud, const LossClosure& loss,
                                       const FiniteDiffOptions& options) {
    FiniteDiffResult out;
    out.grads = GradientBuffer(cloud.size());
    out.unresolved_mask.assign(cloud.size() * 14, 0);
    GaussianCloud probe = cloud;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (int k = 0; k < 14; ++k) {
            double& p = parameter(probe, i, k);
            const double original = p;
            double h = options.step;
            double derivative = 0.0;
            bool resolved = false;
            for (int attempt = 0; attempt <= options.max_refinements; ++attempt, h *= 0.1) {
                p = original + h;
                const double up = loss(probe);
                const std::uint64_t sig_up = options.branch ? options.branch(probe) : 0;
                p = original - h;
                const double down = loss(probe);
                const std::uint64_t sig_down = options.branch ? options.branch(probe) : 0;
                derivative = (up - down) / (2.0 * h);
                if (sig_up == sig_down) {
                    resolved = true;
                    break;
                }
                if (attempt == 0) ++out.refined;
            }
            p = original;
            if (!resolved) {
                ++out.unresolved;
                out.unresolved_mask[i * 14 + static_cast<std::size_t>(k)] = 1;
            }
            set_gradient(out.grads, i, k, derivative);
        }
    return out;
}

GaussianCloud random_cloud(std::size_t n, const CameraModel& cam, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GaussianCloud cloud;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 2.0 + 2.0 * u(rng);
        const double px = 0.15 * cam.width + 0.7 * cam.width * u(rng);
        const double py = 0.15 * cam.height + 0.7 * cam.height * u(rng);
        const Vec3 p_cam((px - cam.cx) * z / cam.fx, (py - cam.cy) * z / cam.fy, z);
        const Vec3 world = cam.rotation.transpose() * (p_cam - cam.translation);
        // Projected sigma of roughly 1.5 to 4 pixels.
        const double sigma_px = 1.5 + 2.5 * u(rng);
        const Vec3 ls = Vec3::Constant(std::log(sigma_px * z / cam.fx)) + 0.3 * Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
        const Vec3 rgb(0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng));
        cloud.push_back(world, random_quaternion(rng), ls, logit(0.2 + 0.6 * u(rng)), rgb_to_sh(rgb));
    }
    return cloud;
}

}  // namespace binosplat::testkit
