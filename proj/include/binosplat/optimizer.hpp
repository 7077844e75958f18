// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binosplat/gaussian_cloud.hpp"
#include "binosplat/renderer.hpp"

#include <cstddef>
#include <vector>

namespace binosplat {

struct GroupLearningRates {
    double position = 1.6e-4;
    double rotation = 1e-3;
    double log_scale = 5e-3;
    double opacity = 5e-2;
    double color = 2.5e-3;
};

/// Adaptive-moment optimizer over the five Gaussian parameter groups.
/// Moments are stored per Gaussian so they can follow densification.
class GaussianAdam {
public:
    struct Params {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-15;
    };

    GaussianAdam() = default;
    GaussianAdam(std::size_t n, Params params);

    void step(GaussianCloud& cloud, const GradientBuffer& grads, const GroupLearningRates& lr);

    /// Re-indexes moments after densification; source[i] < 0 starts from zero.
    void remap(const std::vector<std::ptrdiff_t>& source);

    std::size_t size() const { return n_; }
    std::size_t step_index() const { return step_; }

private:
    static constexpr int kWidth = 14;  // 3 position + 4 rotation + 3 scale + 1 opacity + 3 color

    Params params_;
    std::size_t n_ = 0;
    std::size_t step_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

}  // namespace binosplat
