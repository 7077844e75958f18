// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binosplat/adaptive_control.hpp"
#include "binosplat/consistency.hpp"
#include "binosplat/gaussian_cloud.hpp"
#include "binosplat/image.hpp"
#include "binosplat/optimizer.hpp"
#include "binosplat/renderer.hpp"
#include "binosplat/train_config.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace binosplat {

struct View {
    std::string id;
    CameraModel camera;
    Image image;
    std::optional<Image> depth;  // ground truth, synthetic scenes only
    std::optional<Image> alpha;  // ground-truth coverage, synthetic scenes only
};

struct IterationRecord {
    int iter = 0;
    std::string view;
    double l_color = 0.0;
    std::optional<double> l_consis;
    double total = 0.0;
    std::size_t n_gaussians = 0;
    std::optional<double> shift;
    int renders = 0;
};

struct DensifyEvent {
    int iter = 0;
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
    std::size_t n_after = 0;
};

struct EvalRecord {
    int iter = 0;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

/// Append-only record of a run.
struct TrainLog {
    std::vector<IterationRecord> iterations;
    std::vector<DensifyEvent> densify_events;
    std::vector<EvalRecord> evals;

    /// Line-delimited JSON, records in the order they were appended.
    std::string to_jsonl() const;

private:
    friend class Trainer;
    std::vector<std::string> lines_;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 1.1 x the largest distance from the mean camera center.
double scene_extent(const std::vector<View>& views);

/// Owns the optimization state of one run and advances it one iteration at a time.
class Trainer {
public:
    Trainer(TrainConfig config, GaussianCloud initial, std::vector<View> train_views,
            std::vector<View> test_views = {});

    /// Runs iteration number `iteration()` and advances the counter.
    const IterationRecord& step();

    int iteration() const { return iter_; }
    const GaussianCloud& cloud() const { return cloud_; }
    const TrainLog& log() const { return log_; }
    const TrainConfig& config() const { return config_; }
    double extent() const { return extent_; }

    /// Gradient of the total loss at the current state for a given view and shift,
    /// without updating anything. `shift` is ignored if the consistency term is off.
    GradientBuffer loss_gradient(std::size_t view_index, std::optional<double> shift, double* total = nullptr,
                                 double* l_color = nullptr, double* l_consis = nullptr) const;

    double position_lr(int iter) const;
    RenderSettings render_settings() const;

private:
    std::size_t next_view();
    void append_line(std::string line);

    TrainConfig config_;
    GaussianCloud cloud_;
    std::vector<View> train_;
    std::vector<View> test_;
    double extent_ = 1.0;
    GaussianAdam adam_;
    DensifyStats stats_;
    Rng rng_;
    std::vector<std::size_t> epoch_order_;
    std::size_t epoch_pos_ = 0;
    int iter_ = 0;
    TrainLog log_;
};

/// Held-out metrics of `cloud` over `views`; images are 8-bit quantized before comparison.
struct ViewMetrics {
    std::string id;
    double psnr = 0.0;
    double ssim = 0.0;
    /// Mean |depth - GT depth| over pixels whose GT coverage exceeds 0.9
    /// (GT depth > 0 when no coverage map is known); absent without GT depth.
    std::optional<double> depth_mae;
};

std::vector<ViewMetrics> evaluate(const GaussianCloud& cloud, const std::vector<View>& views,
                                  const Vec3& background, const RenderSettings& settings = {});

struct TrainResult {
    GaussianCloud cloud;
    TrainLog log;
};

/// Runs config.total_iters iterations. `on_checkpoint(iter, trainer)` fires every
/// checkpoint_interval iterations when set.
TrainResult train(const TrainConfig& config, const GaussianCloud& initial, const std::vector<View>& train_views,
                  const std::vector<View>& test_views = {},
                  const std::function<void(int, const Trainer&)>& on_checkpoint = {});

}  // namespace binosplat
