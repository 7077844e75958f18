// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/cli.hpp"

#include "binosplat/initialization.hpp"
#include "binosplat/losses.hpp"
#include "binosplat/parallel.hpp"
#include "binosplat/scene_io.hpp"
#include "binosplat/testkit.hpp"
#include "binosplat/trainer.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace binosplat {

namespace fs = std::filesystem;

namespace {

std::string format_metric(double v) {
    if (std::isinf(v)) return "inf";
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
}

struct MakeSyntheticArgs {
    std::string kind = "two-layer";
    std::string out;
    testkit::SyntheticSceneSpec spec;
    double noise_px = 0.5;
    double outlier_rate = 0.0;
};

struct InitArgs {
    std::string scene;
    std::string mode = "dense";
    std::string out;
    std::size_t count = 1000;
    std::uint64_t seed = 0;
    double max_reproj = 2.0;
    double min_conf = 0.5;
};

struct TrainArgs {
    std::string scene;
    std::string init;
    std::string out;
    std::string config;
    int iters = -1;
    long long seed = -1;
    double lambda = -1.0;
    bool no_consistency = false;
};

struct RenderArgs {
    std::string cloud;
    std::string scene;
    std::vector<std::string> views;
    std::string out;
    std::string depth_format = "pfm";
    double depth_scale = 1000.0;
};

struct EvalArgs {
    std::string cloud;
    std::string renders;
    std::string scene;
    std::string split = "test";
    std::string out;
};

int run_make_synthetic(const MakeSyntheticArgs& a, std::ostream& out) {
    testkit::SyntheticSceneSpec spec = a.spec;
    spec.kind = testkit::parse_scene_kind(a.kind);
    const testkit::SyntheticScene scene = testkit::make_scene(spec);
    const SceneBundle bundle = testkit::write_scene(scene, a.out, a.noise_px, a.outlier_rate);
    out << "wrote " << testkit::scene_kind_name(spec.kind) << " scene to " << a.out << " ("
        << bundle.train_ids.size() << " train, " << bundle.test_ids.size() << " test views, " << scene.gt.size()
        << " gaussians)\n";
    return 0;
}

int run_init(const InitArgs& a, std::ostream& out) {
    const SceneBundle s = load_scene(a.scene);
    GaussianCloud cloud;
    if (a.mode == "dense") {
        if (!s.correspondences) throw InitError("scene has no correspondence file");
        const auto sets = read_correspondences(s.resolve(*s.correspondences));
        std::vector<std::string> ids;
        for (const auto& set : sets) {
            ids.push_back(set.view_a);
            ids.push_back(set.view_b);
        }
        std::map<std::string, Image> images;
        for (const auto& id : ids) {
            if (!s.images.contains(id)) throw InitError("correspondences reference view '" + id + "' without an image");
            if (!images.contains(id)) images[id] = read_png(s.resolve(s.images.at(id)));
        }
        cloud = init_dense(s.cameras, images, sets, TriangulationGates{a.max_reproj, a.min_conf});
    } else if (a.mode == "sparse") {
        if (!s.init_ply) throw InitError("scene has no init_ply");
        cloud = init_sparse(s.resolve(*s.init_ply).string());
    } else if (a.mode == "random") {
        std::vector<CameraModel> cams;
        for (const auto& id : s.train_ids) cams.push_back(s.cameras.at(id));
        const auto [lo, hi] = frustum_bounds(cams, 1.0, 6.0);
        Rng rng(a.seed);
        cloud = init_random(a.count, lo, hi, rng);
    } else {
        throw std::invalid_argument("unknown init mode '" + a.mode + "' (expected dense, sparse or random)");
    }
    write_ply_file(a.out, quantize_to_float(cloud));
    out << "wrote " << cloud.size() << " gaussians to " << a.out << "\n";
    return 0;
}

int run_train(const TrainArgs& a, std::ostream& out) {
    TrainConfig cfg;
    if (!a.config.empty()) cfg = config_from_json(read_text_file(a.config));
    if (a.iters >= 0) cfg.total_iters = a.iters;
    if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
    if (a.lambda >= 0.0) cfg.lambda = a.lambda;
    if (a.no_consistency) cfg.consistency_enabled = false;
    cfg.validate();

    const SceneBundle s = load_scene(a.scene);
    const GaussianCloud init = read_ply_file(a.init);
    const auto train_views = load_views(s, s.train_ids);
    const auto test_views = load_views(s, s.test_ids);

    fs::create_directories(a.out);
    write_text_file(fs::path(a.out) / "config.json", to_json(cfg) + "\n");
    auto checkpoint = [&](int iter, const Trainer& t) {
        write_ply_file((fs::path(a.out) / ("checkpoint_" + std::to_string(iter) + ".ply")).string(), t.cloud());
    };
    const TrainResult result = train(cfg, init, train_views, test_views, checkpoint);
    write_ply_file((fs::path(a.out) / "point_cloud.ply").string(), result.cloud);
    write_text_file(fs::path(a.out) / "train_log.jsonl", result.log.to_jsonl());
    out << "trained " << cfg.total_iters << " iterations; " << result.cloud.size() << " gaussians written to "
        << (fs::path(a.out) / "point_cloud.ply").string() << "\n";
    return 0;
}

int run_render(const RenderArgs& a, std::ostream& out) {
    const SceneBundle s = load_scene(a.scene);
    const GaussianCloud cloud = read_ply_file(a.cloud);
    std::vector<std::string> ids = a.views;
    if (ids.empty()) ids = s.camera_ids;
    if (a.depth_format != "pfm" && a.depth_format != "png16")
        throw std::invalid_argument("depth format must be pfm or png16");
    fs::create_directories(a.out);
    for (const auto& id : ids) {
        if (!s.cameras.contains(id)) throw SceneError(SceneError::Kind::UnknownId, "unknown view '" + id + "'");
        const RenderResult r = render(cloud, s.cameras.at(id), Vec3::Zero());
        write_png(fs::path(a.out) / (id + ".png"), r.frame.color);
        if (a.depth_format == "pfm") write_pfm(fs::path(a.out) / (id + "_depth.pfm"), r.frame.depth);
        else write_png16(fs::path(a.out) / (id + "_depth.png"), r.frame.depth, a.depth_scale);
    }
    out << "rendered " << ids.size() << " views to " << a.out << "\n";
    return 0;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
    if (a.cloud.empty() == a.renders.empty()) throw std::invalid_argument("eval needs exactly one of --cloud or --renders");
    const SceneBundle s = load_scene(a.scene);
    std::vector<std::string> ids;
    if (a.split == "test" || a.split == "all") ids.insert(ids.end(), s.test_ids.begin(), s.test_ids.end());
    if (a.split == "train" || a.split == "all") ids.insert(ids.end(), s.train_ids.begin(), s.train_ids.end());
    if (a.split != "test" && a.split != "train" && a.split != "all")
        throw std::invalid_argument("split must be test, train or all");
    if (ids.empty()) throw SceneError(SceneError::Kind::Schema, "scene has no views in split '" + a.split + "'");
    const auto views = load_views(s, ids);

    std::vector<ViewMetrics> metrics;
    if (!a.cloud.empty()) {
        metrics = evaluate(read_ply_file(a.cloud), views, Vec3::Zero());
    } else {
        for (const auto& v : views) {
            const Image r = read_png(fs::path(a.renders) / (v.id + ".png"));
            metrics.push_back(ViewMetrics{v.id, psnr(r, v.image), ssim(r, v.image), std::nullopt});
        }
    }

    std::ostringstream table;
    table << "view\tpsnr\tssim\tdepth_mae\n";
    double mp = 0.0, ms = 0.0;
    for (const auto& m : metrics) {
        table << m.id << "\t" << format_metric(m.psnr) << "\t" << format_metric(m.ssim) << "\t"
              << (m.depth_mae ? format_metric(*m.depth_mae) : "-") << "\n";
        mp += m.psnr;
        ms += m.ssim;
    }
    const double n = static_cast<double>(metrics.size());
    table << "mean\t" << format_metric(mp / n) << "\t" << format_metric(ms / n) << "\t-\n";
    out << "# LPIPS not computed (requires a pretrained network)\n" << table.str();
    if (!a.out.empty()) write_text_file(a.out, table.str());
    return 0;
}

const char* error_class(const std::exception& e) {
    if (dynamic_cast<const SceneError*>(&e)) return "scene";
    if (dynamic_cast<const PlyError*>(&e)) return "ply";
    if (dynamic_cast<const InitError*>(&e)) return "init";
    if (dynamic_cast<const TrainingError*>(&e)) return "training";
    if (dynamic_cast<const std::invalid_argument*>(&e)) return "config";
    return "runtime";
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"binosplat: sparse-view Gaussian splatting with binocular consistency"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = automatic)")->check(CLI::NonNegativeNumber);

    MakeSyntheticArgs ms;
    auto* make = app.add_subcommand("make-synthetic", "Generate a synthetic scene directory");
    make->add_option("--kind", ms.kind, "textured-plane | two-layer | random-blob-cloud");
    make->add_option("--out", ms.out, "Output scene directory")->required();
    make->add_option("--seed", ms.spec.seed);
    make->add_option("--gaussians", ms.spec.n_gaussians)->check(CLI::PositiveNumber);
    make->add_option("--cameras", ms.spec.camera_count)->check(CLI::Range(2, 64));
    make->add_option("--train", ms.spec.train_count)->check(CLI::PositiveNumber);
    make->add_option("--width", ms.spec.width)->check(CLI::PositiveNumber);
    make->add_option("--height", ms.spec.height)->check(CLI::PositiveNumber);
    make->add_option("--focal", ms.spec.focal)->check(CLI::PositiveNumber);
    make->add_option("--noise-px", ms.noise_px, "Pixel noise of fabricated correspondences")->check(CLI::NonNegativeNumber);
    make->add_option("--outlier-rate", ms.outlier_rate)->check(CLI::Range(0.0, 1.0));

    InitArgs ia;
    auto* init = app.add_subcommand("init-points", "Build the initial Gaussian cloud");
    init->add_option("--scene", ia.scene)->required();
    init->add_option("--mode", ia.mode, "dense | sparse | random");
    init->add_option("--out", ia.out, "Output PLY")->required();
    init->add_option("--count", ia.count, "Random mode point count")->check(CLI::PositiveNumber);
    init->add_option("--seed", ia.seed);
    init->add_option("--max-reproj", ia.max_reproj, "Reprojection gate in pixels")->check(CLI::NonNegativeNumber);
    init->add_option("--min-confidence", ia.min_conf)->check(CLI::Range(0.0, 1.0));

    TrainArgs ta;
    auto* trn = app.add_subcommand("train", "Optimize a cloud against the scene's training views");
    trn->add_option("--scene", ta.scene)->required();
    trn->add_option("--init", ta.init, "Initial cloud PLY")->required();
    trn->add_option("--out", ta.out, "Output directory")->required();
    trn->add_option("--config", ta.config, "JSON training config");
    trn->add_option("--iters", ta.iters, "Override total_iters")->check(CLI::NonNegativeNumber);
    trn->add_option("--seed", ta.seed, "Override seed")->check(CLI::NonNegativeNumber);
    trn->add_option("--lambda", ta.lambda, "Override opacity decay")->check(CLI::Range(0.0, 1.0));
    trn->add_flag("--no-consistency", ta.no_consistency, "Disable the binocular consistency loss");

    RenderArgs ra;
    auto* rnd = app.add_subcommand("render", "Render color and depth images of a cloud");
    rnd->add_option("--cloud", ra.cloud)->required();
    rnd->add_option("--scene", ra.scene)->required();
    rnd->add_option("--view", ra.views, "View ids (default: all cameras)");
    rnd->add_option("--out", ra.out)->required();
    rnd->add_option("--depth-format", ra.depth_format, "pfm | png16");
    rnd->add_option("--depth-scale", ra.depth_scale, "png16 depth units per scene unit")->check(CLI::PositiveNumber);

    EvalArgs ea;
    auto* evl = app.add_subcommand("eval", "PSNR/SSIM of a cloud or of rendered images over held-out views");
    evl->add_option("--cloud", ea.cloud);
    evl->add_option("--renders", ea.renders, "Directory of <view>.png renders");
    evl->add_option("--scene", ea.scene)->required();
    evl->add_option("--split", ea.split, "test | train | all");
    evl->add_option("--out", ea.out, "Also write the metrics table here");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (threads > 0) set_thread_count(threads);
        if (*make) return run_make_synthetic(ms, out);
        if (*init) return run_init(ia, out);
        if (*trn) return run_train(ta, out);
        if (*rnd) return run_render(ra, out);
        if (*evl) return run_eval(ea, out);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& c : msg)
            if (c == '\n') c = ' ';
        err << "error: " << error_class(e) << ": " << msg << "\n";
        return 1;
    }
    return 2;
}

}  // namespace binosplat
