// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/trainer.hpp"

#include "binosplat/losses.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace binosplat {

using nlohmann::json;

std::string TrainLog::to_jsonl() const {
    std::string out;
    for (const auto& l : lines_) {
        out += l;
        out += '\n';
    }
    return out;
}

double scene_extent(const std::vector<View>& views) {
    if (views.empty()) return 1.0;
    Vec3 mean = Vec3::Zero();
    for (const auto& v : views) mean += v.camera.optical_center();
    mean /= static_cast<double>(views.size());
    double radius = 0.0;
    for (const auto& v : views) radius = std::max(radius, (v.camera.optical_center() - mean).norm());
    return radius > 0.0 ? 1.1 * radius : 1.0;
}

Trainer::Trainer(TrainConfig config, GaussianCloud initial, std::vector<View> train_views,
                 std::vector<View> test_views)
    : config_(std::move(config)),
      cloud_(std::move(initial)),
      train_(std::move(train_views)),
      test_(std::move(test_views)),
      extent_(scene_extent(train_)),
      adam_(cloud_.size(), GaussianAdam::Params{config_.adam_beta1, config_.adam_beta2, config_.adam_epsilon}),
      stats_(cloud_.size()),
      rng_(config_.seed) {
    config_.validate();
    cloud_.validate();
    if (train_.empty()) throw std::invalid_argument("trainer: at least one training view is required");
    for (const auto& v : train_) {
        v.camera.validate();
        if (v.image.width != v.camera.width || v.image.height != v.camera.height || v.image.channels != 3)
            throw std::invalid_argument("trainer: image of view '" + v.id + "' does not match its camera");
    }
}

RenderSettings Trainer::render_settings() const {
    RenderSettings s;
    s.normalize_depth = config_.normalize_depth;
    return s;
}

double Trainer::position_lr(int iter) const {
    if (config_.lr_position_init == 0.0) return 0.0;
    const double t = config_.total_iters > 0 ? std::clamp(static_cast<double>(iter) / config_.total_iters, 0.0, 1.0)
                                             : 0.0;
    const double log_lr =
        (1.0 - t) * std::log(config_.lr_position_init) + t * std::log(config_.lr_position_final);
    return std::exp(log_lr) * extent_;
}

std::size_t Trainer::next_view() {
    if (epoch_pos_ >= epoch_order_.size()) {
        epoch_order_.resize(train_.size());
        std::iota(epoch_order_.begin(), epoch_order_.end(), 0);
        std::shuffle(epoch_order_.begin(), epoch_order_.end(), rng_);
        epoch_pos_ = 0;
    }
    return epoch_order_[epoch_pos_++];
}

void Trainer::append_line(std::string line) { log_.lines_.push_back(std::move(line)); }

namespace {

struct LossEvaluation {
    double l_color = 0.0;
    std::optional<double> l_consis;
    GradientBuffer grads;
    GradientBuffer primary;  // gradients through the source-view render only
    int renders = 0;
};

LossEvaluation evaluate_loss(const GaussianCloud& cloud, const View& view, const TrainConfig& cfg,
                             const RenderSettings& settings, std::optional<double> shift) {
    LossEvaluation out;
    const RenderResult base = render(cloud, view.camera, cfg.background, settings);
    out.renders = 1;
    const LossValue color = color_loss(base.frame.color, view.image, cfg.beta);
    out.l_color = color.value;

    const int W = view.camera.width, H = view.camera.height;
    Image d_depth(W, H, 1);
    const Image d_alpha(W, H, 1);
    std::optional<GradientBuffer> translated;
    if (shift) {
        const CameraModel moved = translate_camera(view.camera, *shift);
        const RenderResult right = render(cloud, moved, cfg.background, settings);
        ++out.renders;
        ConsistencyResult cr = consistency_loss(view.image, right.frame.color, base.frame.depth, base.frame.alpha,
                                                view.camera, *shift, ConsistencyOptions{cfg.alpha_min});
        out.l_consis = cfg.consistency_weight * cr.value;
        if (cfg.consis_grad_image) {
            for (double& g : cr.d_right.data) g *= cfg.consistency_weight;
            translated = render_backward(right.state, cr.d_right, Image(W, H, 1), Image(W, H, 1));
        }
        if (cfg.consis_grad_depth) {
            for (std::size_t i = 0; i < d_depth.size(); ++i)
                d_depth.data[i] = cfg.consistency_weight * cr.d_depth_left.data[i];
        }
    }
    out.primary = render_backward(base.state, color.d_image, d_depth, d_alpha);
    out.grads = out.primary;
    if (translated) {
        // Screen-space statistics stay tied to the source view.
        const auto means2d = out.grads.d_means2d;
        const auto visible = out.grads.visible;
        out.grads += *translated;
        out.grads.d_means2d = means2d;
        out.grads.visible = visible;
    }
    return out;
}

std::string format_iteration(const IterationRecord& r) {
    json j;
    j["type"] = "iter";
    j["iter"] = r.iter;
    j["view"] = r.view;
    j["l_color"] = r.l_color;
    j["l_consis"] = r.l_consis ? json(*r.l_consis) : json(nullptr);
    j["total"] = r.total;
    j["n_gaussians"] = r.n_gaussians;
    j["shift"] = r.shift ? json(*r.shift) : json(nullptr);
    j["renders"] = r.renders;
    return j.dump();
}

}  // namespace

GradientBuffer Trainer::loss_gradient(std::size_t view_index, std::optional<double> shift, double* total,
                                      double* l_color, double* l_consis) const {
    if (!config_.consistency_enabled) shift.reset();
    LossEvaluation ev = evaluate_loss(cloud_, train_.at(view_index), config_, render_settings(), shift);
    if (l_color) *l_color = ev.l_color;
    if (l_consis) *l_consis = ev.l_consis.value_or(0.0);
    if (total) *total = ev.l_color + ev.l_consis.value_or(0.0);
    return ev.grads;
}

const IterationRecord& Trainer::step() {
    const int iter = iter_;
    const std::size_t vi = next_view();
    const View& view = train_[vi];

    std::optional<double> shift;
    if (config_.consistency_enabled && iter >= config_.consistency_start()) shift = sample_shift(rng_, config_.d_max);

    LossEvaluation ev = evaluate_loss(cloud_, view, config_, render_settings(), shift);
    auto check = [&](double v, const char* term) {
        if (std::isfinite(v)) return;
        std::ostringstream msg;
        msg << "non-finite loss at iteration " << iter << ": " << term << " = " << v << " (view '" << view.id
            << "', " << cloud_.size() << " gaussians)";
        throw TrainingError(msg.str());
    };
    check(ev.l_color, "L_color");
    if (ev.l_consis) check(*ev.l_consis, "L_consis");
    if (!ev.grads.all_finite())
        throw TrainingError("non-finite gradient at iteration " + std::to_string(iter) + " (view '" + view.id + "')");

    GroupLearningRates lr;
    lr.position = position_lr(iter);
    lr.rotation = config_.lr_rotation;
    lr.log_scale = config_.lr_scale;
    lr.opacity = config_.lr_opacity;
    lr.color = config_.lr_color;
    adam_.step(cloud_, ev.grads, lr);
    opacity_decay(cloud_, config_.lambda);

    const int until = config_.densify_until();
    if (iter < until) accumulate_densify_stats(stats_, ev.grads.d_means2d, ev.grads.visible);
    const bool on_interval = iter > 0 && iter % config_.densify_interval == 0;
    if (on_interval && iter >= config_.densify_from_iter && iter < until) {
        DensifyConfig dc;
        dc.grad_threshold = config_.grad_threshold;
        dc.percent_dense = config_.percent_dense;
        dc.split_factor = config_.split_factor;
        dc.prune_opacity = config_.prune_opacity;
        dc.scene_extent = extent_;
        const DensifyReport rep = densify_and_prune(cloud_, stats_, dc, rng_);
        adam_.remap(rep.source);
        log_.densify_events.push_back({iter, rep.cloned, rep.split, rep.pruned, cloud_.size()});
    } else if (on_interval && iter >= until && config_.prune_after_densify) {
        const std::size_t before = cloud_.size();
        const auto kept = prune_transparent(cloud_, config_.prune_opacity);
        adam_.remap(kept);
        stats_.reset(cloud_.size());
        log_.densify_events.push_back({iter, 0, 0, before - cloud_.size(), cloud_.size()});
    }
    if (!log_.densify_events.empty() && log_.densify_events.back().iter == iter) {
        const DensifyEvent& e = log_.densify_events.back();
        json j{{"type", "densify"}, {"iter", e.iter},     {"cloned", e.cloned},
               {"split", e.split},  {"pruned", e.pruned}, {"n_gaussians", e.n_after}};
        append_line(j.dump());
    }

    IterationRecord rec;
    rec.iter = iter;
    rec.view = view.id;
    rec.l_color = ev.l_color;
    rec.l_consis = ev.l_consis;
    rec.total = ev.l_color + ev.l_consis.value_or(0.0);
    rec.n_gaussians = cloud_.size();
    rec.shift = shift;
    rec.renders = ev.renders;
    log_.iterations.push_back(rec);
    append_line(format_iteration(rec));

    ++iter_;
    if (config_.eval_interval > 0 && !test_.empty() && iter_ % config_.eval_interval == 0) {
        const auto metrics = evaluate(cloud_, test_, config_.background, render_settings());
        EvalRecord er{iter_, 0.0, 0.0};
        for (const auto& m : metrics) {
            er.mean_psnr += m.psnr;
            er.mean_ssim += m.ssim;
        }
        er.mean_psnr /= static_cast<double>(metrics.size());
        er.mean_ssim /= static_cast<double>(metrics.size());
        log_.evals.push_back(er);
        append_line(json{{"type", "eval"}, {"iter", er.iter}, {"psnr", er.mean_psnr}, {"ssim", er.mean_ssim}}.dump());
    }
    return log_.iterations.back();
}

std::vector<ViewMetrics> evaluate(const GaussianCloud& cloud, const std::vector<View>& views,
                                  const Vec3& background, const RenderSettings& settings) {
    std::vector<ViewMetrics> out;
    for (const auto& v : views) {
        const RenderResult r = render(cloud, v.camera, background, settings);
        const Image rendered = quantize_8bit(r.frame.color);
        ViewMetrics m;
        m.id = v.id;
        m.psnr = psnr(rendered, v.image);
        m.ssim = ssim(rendered, v.image);
        if (v.depth) {
            double sum = 0.0;
            std::size_t count = 0;
            for (int row = 0; row < v.camera.height; ++row)
                for (int col = 0; col < v.camera.width; ++col) {
                    const bool covered = v.alpha ? v.alpha->at(row, col) > 0.9 : v.depth->at(row, col) > 0.0;
                    if (!covered) continue;
                    sum += std::abs(r.frame.depth.at(row, col) - v.depth->at(row, col));
                    ++count;
                }
            if (count > 0) m.depth_mae = sum / static_cast<double>(count);
        }
        out.push_back(m);
    }
    return out;
}

TrainResult train(const TrainConfig& config, const GaussianCloud& initial, const std::vector<View>& train_views,
                  const std::vector<View>& test_views, const std::function<void(int, const Trainer&)>& on_checkpoint) {
    Trainer trainer(config, initial, train_views, test_views);
    for (int i = 0; i < config.total_iters; ++i) {
        trainer.step();
        if (on_checkpoint && config.checkpoint_interval > 0 && trainer.iteration() % config.checkpoint_interval == 0)
            on_checkpoint(trainer.iteration(), trainer);
    }
    return TrainResult{trainer.cloud(), trainer.log()};
}

}  // namespace binosplat
