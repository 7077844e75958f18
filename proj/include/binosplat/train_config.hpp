// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binosplat/camera.hpp"

#include <cstdint>
#include <string>

namespace binosplat {

/// Every hyperparameter of a training run. Serialized as a JSON object.
struct TrainConfig {
    int total_iters = 3000;
    /// Iteration at which the consistency loss switches on; negative selects ceil(2/3 * total_iters).
    int consis_start_iter = -1;
    double beta = 0.2;
    double lambda = 0.995;
    double d_max = 0.4;
    double alpha_min = 0.5;
    double consistency_weight = 1.0;
    bool consistency_enabled = true;
    bool consis_grad_image = true;
    bool consis_grad_depth = true;

    double lr_position_init = 1.6e-4;
    double lr_position_final = 1.6e-6;
    double lr_rotation = 1e-3;
    double lr_scale = 5e-3;
    double lr_opacity = 5e-2;
    double lr_color = 2.5e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-15;

    int densify_interval = 100;
    int densify_from_iter = 500;
    /// Densification stops at this fraction of total_iters.
    double densify_until_fraction = 0.6;
    /// Keep pruning transparent Gaussians at densify_interval after the densification window.
    bool prune_after_densify = true;
    double grad_threshold = 2e-4;
    double percent_dense = 0.01;
    double split_factor = 1.6;
    double prune_opacity = 0.005;

    std::uint64_t seed = 0;
    Vec3 background = Vec3::Zero();
    bool normalize_depth = true;
    int eval_interval = 0;        // 0 disables periodic held-out metrics
    int checkpoint_interval = 0;  // 0 writes only the final checkpoint

    int consistency_start() const;
    int densify_until() const;
    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

std::string to_json(const TrainConfig& cfg);
/// Unknown keys are rejected; missing keys keep their defaults.
TrainConfig config_from_json(const std::string& text);

}  // namespace binosplat
