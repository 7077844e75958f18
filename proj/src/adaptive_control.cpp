// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/adaptive_control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace binosplat {

void DensifyStats::reset(std::size_t n) {
    grad_accum.assign(n, 0.0);
    counts.assign(n, 0.0);
}

void opacity_decay(GaussianCloud& cloud, double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("opacity_decay: lambda must lie in (0, 1]");
    if (lambda == 1.0) return;
    for (double& l : cloud.opacity_logits) {
        const double a = std::max(lambda * sigmoid(l), kOpacityFloor);
        l = logit(a);
    }
}

void accumulate_densify_stats(DensifyStats& stats, const std::vector<Vec2>& view_grads,
                              const std::vector<std::uint8_t>& visible) {
    if (view_grads.size() != stats.size() || visible.size() != stats.size())
        throw std::invalid_argument("accumulate_densify_stats: gradient array length does not match the cloud");
    for (std::size_t i = 0; i < stats.size(); ++i) {
        if (!visible[i]) continue;
        stats.grad_accum[i] += view_grads[i].norm();
        stats.counts[i] += 1.0;
    }
}

std::vector<std::ptrdiff_t> prune_transparent(GaussianCloud& cloud, double prune_opacity) {
    GaussianCloud kept;
    kept.reserve(cloud.size());
    std::vector<std::ptrdiff_t> index;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (sigmoid(cloud.opacity_logits[i]) < prune_opacity) continue;
        kept.append_from(cloud, i);
        index.push_back(static_cast<std::ptrdiff_t>(i));
    }
    cloud = std::move(kept);
    return index;
}

namespace {

Vec3 sample_from_covariance(const GaussianCloud& cloud, std::size_t i, const Vec3& log_scale, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec3 n;
    for (int d = 0; d < 3; ++d) n(d) = normal(rng);
    const Mat3 R = quaternion_to_rotation(cloud.rotations[i]);
    return cloud.positions[i] + R * (log_scale.array().exp() * n.array()).matrix();
}

}  // namespace

DensifyReport densify_and_prune(GaussianCloud& cloud, DensifyStats& stats, const DensifyConfig& cfg, Rng& rng) {
    if (stats.size() != cloud.size()) throw std::invalid_argument("densify_and_prune: stats do not match the cloud");
    const std::size_t n = cloud.size();
    const double size_limit = cfg.percent_dense * cfg.scene_extent;
    const double split_shrink = std::log(cfg.split_factor);

    DensifyReport report;
    GaussianCloud next;
    next.reserve(2 * n);
    std::vector<std::ptrdiff_t> source;
    GaussianCloud born;
    std::vector<char> is_split(n, 0);

    for (std::size_t i = 0; i < n; ++i) {
        const double mean_grad = stats.grad_accum[i] / std::max(stats.counts[i], 1.0);
        if (!(mean_grad >= cfg.grad_threshold)) continue;
        const double max_scale = cloud.log_scales[i].array().exp().maxCoeff();
        if (max_scale < size_limit) {
            born.append_from(cloud, i);
            born.positions.back() = sample_from_covariance(cloud, i, cloud.log_scales[i], rng);
            ++report.cloned;
        } else {
            is_split[i] = 1;
            for (int child = 0; child < 2; ++child) {
                born.append_from(cloud, i);
                born.positions.back() = sample_from_covariance(cloud, i, cloud.log_scales[i], rng);
                born.log_scales.back() = cloud.log_scales[i].array() - split_shrink;
            }
            ++report.split;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (is_split[i]) continue;
        next.append_from(cloud, i);
        source.push_back(static_cast<std::ptrdiff_t>(i));
    }
    for (std::size_t j = 0; j < born.size(); ++j) {
        next.append_from(born, j);
        source.push_back(-1);
    }

    const std::size_t before_prune = next.size();
    const auto kept = prune_transparent(next, cfg.prune_opacity);
    report.pruned = before_prune - next.size();
    report.source.reserve(kept.size());
    for (auto k : kept) report.source.push_back(source[static_cast<std::size_t>(k)]);

    cloud = std::move(next);
    stats.reset(cloud.size());
    return report;
}

}  // namespace binosplat
