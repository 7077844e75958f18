// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace binosplat {

GaussianAdam::GaussianAdam(std::size_t n, Params params)
    : params_(params), n_(n), m_(n * kWidth, 0.0), v_(n * kWidth, 0.0) {}

void GaussianAdam::step(GaussianCloud& cloud, const GradientBuffer& grads, const GroupLearningRates& lr) {
    if (cloud.size() != n_ || grads.size() != n_)
        throw std::invalid_argument("GaussianAdam::step: cloud, gradients and optimizer state differ in size");
    ++step_;
    const double b1 = params_.beta1, b2 = params_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));

    auto update = [&](double& param, double g, std::size_t slot, double rate) {
        double& m = m_[slot];
        double& v = v_[slot];
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        if (rate == 0.0) return;
        param -= rate * (m / c1) / (std::sqrt(v / c2) + params_.epsilon);
    };

    for (std::size_t i = 0; i < n_; ++i) {
        std::size_t s = i * kWidth;
        for (int d = 0; d < 3; ++d) update(cloud.positions[i](d), grads.d_positions[i](d), s++, lr.position);
        for (int d = 0; d < 4; ++d) update(cloud.rotations[i](d), grads.d_rotations[i](d), s++, lr.rotation);
        for (int d = 0; d < 3; ++d) update(cloud.log_scales[i](d), grads.d_log_scales[i](d), s++, lr.log_scale);
        update(cloud.opacity_logits[i], grads.d_opacity_logits[i], s++, lr.opacity);
        for (int d = 0; d < 3; ++d) update(cloud.colors[i](d), grads.d_colors[i](d), s++, lr.color);
    }
}

void GaussianAdam::remap(const std::vector<std::ptrdiff_t>& source) {
    std::vector<double> m(source.size() * kWidth, 0.0), v(source.size() * kWidth, 0.0);
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (source[i] < 0) continue;
        const auto from = static_cast<std::size_t>(source[i]);
        if (from >= n_) throw std::out_of_range("GaussianAdam::remap: source index out of range");
        for (int k = 0; k < kWidth; ++k) {
            m[i * kWidth + k] = m_[from * kWidth + k];
            v[i * kWidth + k] = v_[from * kWidth + k];
        }
    }
    m_ = std::move(m);
    v_ = std::move(v);
    n_ = source.size();
}

}  // namespace binosplat
