// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binosplat/consistency.hpp"
#include "binosplat/gaussian_cloud.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace binosplat {

/// Per-Gaussian screen-space gradient statistics driving densification.
struct DensifyStats {
    std::vector<double> grad_accum;
    std::vector<double> counts;

    explicit DensifyStats(std::size_t n = 0) : grad_accum(n, 0.0), counts(n, 0.0) {}
    std::size_t size() const { return grad_accum.size(); }
    void reset(std::size_t n);
};

inline constexpr double kOpacityFloor = 1e-6;

/// alpha <- lambda * alpha for every Gaussian, written back as a logit.
void opacity_decay(GaussianCloud& cloud, double lambda);

/// Adds |grad| and one observation for every visible Gaussian.
void accumulate_densify_stats(DensifyStats& stats, const std::vector<Vec2>& view_grads,
                              const std::vector<std::uint8_t>& visible);

struct DensifyConfig {
    double grad_threshold = 2e-4;
    double percent_dense = 0.01;
    double split_factor = 1.6;
    double prune_opacity = 0.005;
    double scene_extent = 1.0;
};

struct DensifyReport {
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
    /// For every output Gaussian, the input index whose optimizer state it
    /// keeps, or -1 for a newly created Gaussian.
    std::vector<std::ptrdiff_t> source;
};

/// Clone small high-gradient Gaussians, split large ones, prune transparent ones.
/// Never resets opacity and never prunes by scale. Resets `stats` to the new size.
DensifyReport densify_and_prune(GaussianCloud& cloud, DensifyStats& stats, const DensifyConfig& cfg, Rng& rng);

/// Removes Gaussians with opacity below `prune_opacity`; returns the kept input indices.
std::vector<std::ptrdiff_t> prune_transparent(GaussianCloud& cloud, double prune_opacity);

}  // namespace binosplat
