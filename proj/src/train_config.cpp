// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/train_config.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace binosplat {

using nlohmann::json;

int TrainConfig::consistency_start() const {
    if (consis_start_iter >= 0) return consis_start_iter;
    return static_cast<int>(std::ceil(2.0 * total_iters / 3.0));
}

int TrainConfig::densify_until() const {
    return static_cast<int>(std::floor(densify_until_fraction * total_iters));
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("invalid config value '" + field + "': " + why);
    };
    if (total_iters < 0) fail("total_iters", "must be non-negative");
    if (!(lambda > 0.0 && lambda <= 1.0)) fail("lambda", "must lie in (0, 1]");
    if (!(beta >= 0.0 && beta <= 1.0)) fail("beta", "must lie in [0, 1]");
    if (!(d_max > 0.0)) fail("d_max", "must be positive");
    if (!(alpha_min >= 0.0 && alpha_min <= 1.0)) fail("alpha_min", "must lie in [0, 1]");
    if (densify_interval < 1) fail("densify_interval", "must be at least 1");
    if (!(split_factor > 1.0)) fail("split_factor", "must exceed 1");
    if (!(prune_opacity >= 0.0 && prune_opacity < 1.0)) fail("prune_opacity", "must lie in [0, 1)");
    for (double lr : {lr_position_init, lr_position_final, lr_rotation, lr_scale, lr_opacity, lr_color})
        if (!(lr >= 0.0)) fail("learning rate", "must be non-negative");
    if (lr_position_init > 0.0 && !(lr_position_final > 0.0))
        fail("lr_position_final", "must be positive for the exponential schedule");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        fail("adam_beta", "must lie in [0, 1)");
}

namespace {

#define BINOSPLAT_CONFIG_FIELDS(X)                                                                            \
    X(total_iters) X(consis_start_iter) X(beta) X(lambda) X(d_max) X(alpha_min) X(consistency_weight)           \
    X(consistency_enabled) X(consis_grad_image) X(consis_grad_depth) X(lr_position_init) X(lr_position_final)   \
    X(lr_rotation) X(lr_scale) X(lr_opacity) X(lr_color) X(adam_beta1) X(adam_beta2) X(adam_epsilon)          \
    X(densify_interval) X(densify_from_iter) X(densify_until_fraction) X(prune_after_densify) X(grad_threshold) \
    X(percent_dense) X(split_factor) X(prune_opacity) X(seed) X(normalize_depth) X(eval_interval)              \
    X(checkpoint_interval)

}  // namespace

std::string to_json(const TrainConfig& cfg) {
    json j;
    j["version"] = 1;
#define X(name) j[#name] = cfg.name;
    BINOSPLAT_CONFIG_FIELDS(X)
#undef X
    j["background"] = {cfg.background.x(), cfg.background.y(), cfg.background.z()};
    return j.dump(2);
}

TrainConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    TrainConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        try {
            if (key == "version") {
                if (it.value() != 1) throw std::invalid_argument("unsupported config version");
                continue;
            }
            if (key == "background") {
                const auto bg = it.value().get<std::vector<double>>();
                if (bg.size() != 3) throw std::invalid_argument("background needs 3 components");
                cfg.background = Vec3(bg[0], bg[1], bg[2]);
                continue;
            }
#define X(name)                                        \
    if (key == #name) {                                \
        it.value().get_to(cfg.name);                   \
        continue;                                      \
    }
            BINOSPLAT_CONFIG_FIELDS(X)
#undef X
        } catch (const json::exception& e) {
            throw std::invalid_argument("invalid config value '" + key + "': " + e.what());
        }
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

}  // namespace binosplat
