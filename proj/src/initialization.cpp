// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/initialization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace binosplat {

namespace {

// Mean distance to the k nearest neighbours, brute force over a sorted sweep.
std::vector<double> mean_knn_distance(const std::vector<Vec3>& pts, int k) {
    const std::size_t n = pts.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pts[a].x() < pts[b].x(); });
    std::vector<std::size_t> rank(n);
    for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

    const int kk = static_cast<int>(std::min<std::size_t>(k, n - 1));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> best(kk, std::numeric_limits<double>::infinity());
        auto offer = [&](double d2) {
            if (d2 >= best.back()) return;
            best.back() = d2;
            std::sort(best.begin(), best.end());
        };
        const std::size_t r = rank[i];
        for (std::size_t j = r + 1; j < n; ++j) {
            const double dx = pts[order[j]].x() - pts[i].x();
            if (dx * dx >= best.back()) break;
            offer((pts[order[j]] - pts[i]).squaredNorm());
        }
        for (std::size_t j = r; j-- > 0;) {
            const double dx = pts[i].x() - pts[order[j]].x();
            if (dx * dx >= best.back()) break;
            offer((pts[order[j]] - pts[i]).squaredNorm());
        }
        double sum = 0.0;
        for (double d2 : best) sum += std::sqrt(d2);
        out[i] = sum / kk;
    }
    return out;
}

}  // namespace

GaussianCloud cloud_from_points(const std::vector<Vec3>& points, const std::vector<Vec3>& rgbs) {
    const auto spacing = mean_knn_distance(points, 3);
    GaussianCloud cloud;
    cloud.reserve(points.size());
    const double opacity_logit = logit(kInitialOpacity);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double s = points.size() < 2 ? 0.01 : std::max(spacing[i], 1e-7);
        cloud.push_back(points[i], Vec4(1, 0, 0, 0), Vec3::Constant(std::log(s)), opacity_logit, rgb_to_sh(rgbs[i]));
    }
    return cloud;
}

Vec3 sample_color(const Image& image, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(image.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(image.height - 1));
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, image.width - 1), y1 = std::min(y0 + 1, image.height - 1);
    const double wx = x - x0, wy = y - y0;
    Vec3 out;
    for (int ch = 0; ch < 3; ++ch) {
        const double top = (1 - wx) * image.at(y0, x0, ch) + wx * image.at(y0, x1, ch);
        const double bottom = (1 - wx) * image.at(y1, x0, ch) + wx * image.at(y1, x1, ch);
        out(ch) = (1 - wy) * top + wy * bottom;
    }
    return out;
}

GaussianCloud init_dense(const std::map<std::string, CameraModel>& cameras,
                         const std::map<std::string, Image>& images,
                         const std::vector<CorrespondenceSet>& correspondence_sets, const TriangulationGates& gates) {
    if (cameras.size() < 2) throw InitError("init_dense: at least two cameras are required");

    std::vector<const CorrespondenceSet*> sets;
    for (const auto& s : correspondence_sets) {
        if (!cameras.contains(s.view_a) || !cameras.contains(s.view_b))
            throw InitError("init_dense: correspondence set references unknown view '" +
                            (cameras.contains(s.view_a) ? s.view_b : s.view_a) + "'");
        if (!images.contains(s.view_a) || !images.contains(s.view_b))
            throw InitError("init_dense: missing image for view pair " + s.view_a + "/" + s.view_b);
        sets.push_back(&s);
    }
    std::stable_sort(sets.begin(), sets.end(), [](const CorrespondenceSet* a, const CorrespondenceSet* b) {
        return std::tie(a->view_a, a->view_b) < std::tie(b->view_a, b->view_b);
    });

    std::vector<Vec3> points, rgbs;
    for (const CorrespondenceSet* s : sets) {
        const CameraModel& ca = cameras.at(s->view_a);
        const CameraModel& cb = cameras.at(s->view_b);
        const Image& ia = images.at(s->view_a);
        const Image& ib = images.at(s->view_b);
        for (const Match& m : s->matches) {
            if (m.confidence < gates.min_confidence) continue;
            const Triangulation tri = triangulate(ca, cb, m, gates.max_reprojection_px);
            if (!tri.valid) continue;
            points.push_back(tri.point);
            rgbs.push_back(0.5 * (sample_color(ia, m.x_a, m.y_a) + sample_color(ib, m.x_b, m.y_b)));
        }
    }
    if (points.empty()) throw InitError("init_dense: no correspondences survived the confidence and reprojection gates");
    return cloud_from_points(points, rgbs);
}

std::pair<Vec3, Vec3> frustum_bounds(const std::vector<CameraModel>& cameras, double near, double far) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& cam : cameras)
        for (double z : {near, far})
            for (double u : {0.0, 1.0 * (cam.width - 1)})
                for (double v : {0.0, 1.0 * (cam.height - 1)}) {
                    const Vec3 p_cam((u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z);
                    const Vec3 w = cam.rotation.transpose() * (p_cam - cam.translation);
                    lo = lo.cwiseMin(w);
                    hi = hi.cwiseMax(w);
                }
    return {lo, hi};
}

GaussianCloud init_random(std::size_t count, const Vec3& box_min, const Vec3& box_max, Rng& rng) {
    if (count < 1) throw InitError("init_random: count must be at least 1");
    if (!((box_max - box_min).array() > 0.0).all() || !box_min.allFinite() || !box_max.allFinite())
        throw InitError("init_random: bounding box is degenerate");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vec3> points(count), rgbs(count);
    for (std::size_t i = 0; i < count; ++i) {
        for (int d = 0; d < 3; ++d) points[i](d) = box_min(d) + unit(rng) * (box_max(d) - box_min(d));
        for (int d = 0; d < 3; ++d) rgbs[i](d) = unit(rng);
    }
    return cloud_from_points(points, rgbs);
}

GaussianCloud init_sparse_from_bytes(const std::string& ply_bytes) {
    const PlyVertexTable table = parse_ply_vertices(ply_bytes);
    const int cx = table.column("x"), cy = table.column("y"), cz = table.column("z");
    if (cx < 0 || cy < 0 || cz < 0) throw InitError("init_sparse: point PLY lacks x/y/z properties");
    if (table.rows.empty()) throw InitError("init_sparse: point PLY has no vertices");
    const int cr = table.column("red"), cg = table.column("green"), cb = table.column("blue");
    const bool has_color = cr >= 0 && cg >= 0 && cb >= 0;

    std::vector<Vec3> points, rgbs;
    for (const auto& row : table.rows) {
        points.emplace_back(row[cx], row[cy], row[cz]);
        rgbs.push_back(has_color ? Vec3(Vec3(row[cr], row[cg], row[cb]) / 255.0) : Vec3(Vec3::Constant(0.5)));
    }
    return cloud_from_points(points, rgbs);
}

GaussianCloud init_sparse(const std::string& ply_path) {
    std::ifstream in(ply_path, std::ios::binary);
    if (!in) throw InitError("init_sparse: cannot open '" + ply_path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return init_sparse_from_bytes(ss.str());
}

}  // namespace binosplat
