// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 1 usage/contract/format error,
// 2 failed check.
#include "dofsplat/error.hpp"
#include "dofsplat/gradcheck.hpp"
#include "dofsplat/io.hpp"
#include "dofsplat/metrics.hpp"
#include "dofsplat/pipeline.hpp"
#include "dofsplat/synthetic.hpp"
#include "dofsplat/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dofsplat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitCheckFailed = 2;

/// Raised for command-level failures that map to exit code 1.
class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::array<int, 2>
parse_size(const std::string &s) {
    const auto x = s.find_first_of("xX");
    if (x == std::string::npos) {
        throw UsageError("--size must look like WxH, got '" + s + "'");
    }
    try {
        std::size_t used_w = 0, used_h = 0;
        const int w = std::stoi(s.substr(0, x), &used_w);
        const int h = std::stoi(s.substr(x + 1), &used_h);
        if (used_w != x || used_h != s.size() - x - 1) {
            throw UsageError("--size must look like WxH, got '" + s + "'");
        }
        return {w, h};
    } catch (const std::logic_error &) {
        throw UsageError("--size must look like WxH, got '" + s + "'");
    }
}

DepthMode
parse_depth_mode(const std::string &s) {
    if (s == "normalized") {
        return DepthMode::Normalized;
    }
    if (s == "accumulated") {
        return DepthMode::Accumulated;
    }
    throw UsageError("depth mode must be 'normalized' or 'accumulated'");
}

const char *
depth_mode_name(DepthMode m) {
    return m == DepthMode::Normalized ? "normalized" : "accumulated";
}

void
write_json(const fs::path &path, const json &j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

void
ensure_parent(const fs::path &file) {
    if (file.has_parent_path()) {
        fs::create_directories(file.parent_path());
    }
}

fs::path
output_dir_of(const fs::path &file) {
    return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string kind;
    int views = 6;
    std::string size = "64x64";
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;
    double bump_amp = 0.0;
    std::string texture;
    double frequency = 0.0;
    std::string out;
};

int
run_synth(const SynthArgs &a) {
    SyntheticSpec spec = SyntheticSpec::defaults(parse_scene_kind(a.kind));
    spec.views = a.views;
    const auto [w, h] = parse_size(a.size);
    spec.width = w;
    spec.height = h;
    spec.seed = a.seed;
    spec.noise_sigma = a.noise_sigma;
    spec.bump_amp = a.bump_amp;
    if (!a.texture.empty()) {
        spec.texture = parse_texture_kind(a.texture);
    }
    if (a.frequency > 0.0) {
        spec.texture_frequency = a.frequency;
    }
    spec.validate();
    const Dataset data = synthesize(spec);
    write_dataset(data, spec, a.out);
    std::cout << "wrote " << data.views.size() << " views and " << data.test_views.size() << " held-out views to "
              << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string data;
    std::string out;
    long iters = 0;
    std::uint64_t seed = 0;
    bool no_vis = false;
    bool freeze = false;
    bool naive = false;
    std::string config;
    int stride = 0;
    std::string depth_mode;
    long log_every = 100;
};

json
loss_to_json(long it, const LossBreakdown &l) {
    return {{"iteration", it},
            {"l1", l.l1},
            {"dssim", l.dssim},
            {"visibility", l.visibility},
            {"vis_weight", l.vis_weight_used},
            {"masked_pixels", l.masked_pixel_count},
            {"total", l.total}};
}

int
run_train(const TrainArgs &a, const CLI::App &cmd) {
    TrainConfig cfg;
    if (!a.config.empty()) {
        const Bytes raw = read_file(a.config);
        json j;
        try {
            j = json::parse(raw.begin(), raw.end());
        } catch (const json::parse_error &e) {
            throw FormatError(std::string("config: ") + e.what(), e.byte);
        }
        cfg = train_config_from_json(j);
    }
    // Flags given on the command line override the config file.
    if (cmd.count("--iters")) cfg.iterations = a.iters;
    if (cmd.count("--seed")) cfg.seed = a.seed;
    if (a.no_vis) cfg.disable_vis_loss = true;
    if (a.freeze) cfg.freeze_offsets = true;
    if (a.naive) cfg.naive_free_position = true;
    if (cmd.count("--stride")) cfg.stride = a.stride;
    if (cmd.count("--depth-mode")) cfg.depth_mode = parse_depth_mode(a.depth_mode);
    cfg.validate();

    const Dataset data = load_dataset(a.data, false);
    const Scene initial = initial_scene(data, cfg.stride);
    const std::vector<Image> targets = training_targets(data);

    const fs::path out(a.out);
    fs::create_directories(out);
    json echo = train_config_to_json(cfg);
    write_json(out / "train_config.json", {{"command", "train"}, {"data", a.data}, {"config", echo}});

    const ProgressSink sink = [&](long it, const LossBreakdown &l) {
        if (a.log_every > 0 && (it % a.log_every == 0 || it + 1 == cfg.iterations)) {
            std::fprintf(stderr, "iter %6ld  total %.6f  l1 %.6f  dssim %.6f  vis %.6f\n", it, l.total, l.l1, l.dssim,
                         l.visibility);
        }
    };
    try {
        const TrainResult res = train(initial, targets, cfg, sink);
        json hist = json::array();
        for (std::size_t i = 0; i < res.history.size(); ++i) {
            hist.push_back(loss_to_json(static_cast<long>(i), res.history[i]));
        }
        write_json(out / "loss_history.json", hist);
        save_checkpoint(out / "checkpoint.gsds", res.scene);
    } catch (const NonFiniteLossError &e) {
        save_checkpoint(out / "nonfinite_snapshot.gsds", e.snapshot());
        std::cerr << "train: " << e.what() << "; snapshot written to " << (out / "nonfinite_snapshot.gsds") << "\n";
        return kExitCheckFailed;
    }
    std::cout << "checkpoint " << (out / "checkpoint.gsds").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- render

struct RenderArgs {
    std::string checkpoint;
    std::string camera;
    std::string out_color;
    std::string out_depth;
    int sh_degree = kMaxShDegree;
    std::string depth_mode = "normalized";
};

int
run_render(const RenderArgs &a) {
    const Scene scene = load_checkpoint(a.checkpoint);
    const Camera cam = read_camera(a.camera);
    if (a.sh_degree < 0 || a.sh_degree > kMaxShDegree) {
        throw UsageError("--sh-degree must be in 0..3");
    }
    const RenderOptions opts{a.sh_degree, parse_depth_mode(a.depth_mode)};
    const RenderOutput r = render(materialize_scene(scene), cam, opts);
    ensure_parent(a.out_color);
    ensure_parent(a.out_depth);
    write_ppm(a.out_color, r.color);
    write_pfm(a.out_depth, r.depth);
    write_json(output_dir_of(a.out_color) / "render_config.json",
               {{"command", "render"},
                {"checkpoint", a.checkpoint},
                {"camera", a.camera},
                {"out_color", a.out_color},
                {"out_depth", a.out_depth},
                {"sh_degree", a.sh_degree},
                {"depth_mode", depth_mode_name(opts.depth_mode)}});
    return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    int patch = kDefaultPatchSize;
    std::string out;
    std::string overlay;
    std::optional<double> min_pdc;
    std::optional<double> min_psnr;
};

int
run_eval(const EvalArgs &a) {
    if (a.patch < 2) {
        throw UsageError("--patch must be at least 2");
    }
    const Scene scene = load_checkpoint(a.checkpoint);
    const Dataset data = load_dataset(a.data, true);
    const EvalReport rep = evaluate_scene(scene, data, a.patch);
    json j = eval_report_to_json(rep);
    json echo = {{"command", "eval"}, {"checkpoint", a.checkpoint}, {"data", a.data}, {"patch", a.patch}};
    if (!a.overlay.empty()) echo["overlay"] = a.overlay;
    if (a.min_pdc) echo["min_pdc"] = *a.min_pdc;
    if (a.min_psnr) echo["min_psnr"] = *a.min_psnr;
    j["config_echo"] = echo;
    ensure_parent(a.out);
    write_json(a.out, j);

    if (!a.overlay.empty()) {
        const fs::path dir(a.overlay);
        fs::create_directories(dir);
        for (std::size_t v = 0; v < scene.views.size(); ++v) {
            const SceneView &sv = scene.views[v];
            const Image depth = gaussian_depth_map(sv.params, sv.camera);
            write_ppm(dir / (data.views[v].name + "_pdc.ppm"), pdc_overlay(rep.depth[v].pdc, depth));
        }
    }
    std::printf("pdc %.9f  depth_rmse %.9f  psnr %.6f  ssim %.6f\n", rep.pdc, rep.depth_rmse, rep.psnr, rep.ssim);

    bool ok = true;
    if (a.min_pdc && !(rep.pdc >= *a.min_pdc)) {
        std::fprintf(stderr, "eval: pdc %.9f below threshold %.9f\n", rep.pdc, *a.min_pdc);
        ok = false;
    }
    if (a.min_psnr && !(rep.psnr >= *a.min_psnr)) {
        std::fprintf(stderr, "eval: psnr %.6f below threshold %.6f\n", rep.psnr, *a.min_psnr);
        ok = false;
    }
    return ok ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
    GradcheckConfig cfg;
    std::string depth_mode = "normalized";
    std::string out;
};

int
run_gradcheck_cmd(GradcheckArgs a) {
    a.cfg.depth_mode = parse_depth_mode(a.depth_mode);
    const GradcheckReport rep = run_gradcheck(a.cfg);
    json by_class = json::object();
    for (ParamClass pc : kAllParamClasses) {
        const auto c = static_cast<std::size_t>(pc);
        if (rep.checked_by_class[c] > 0) {
            by_class[param_class_name(pc)] = {{"checked", rep.checked_by_class[c]},
                                              {"max_rel_error", rep.max_rel_error_by_class[c]}};
        }
    }
    const json j = {{"config",
                     {{"seed", a.cfg.seed},
                      {"size", a.cfg.size},
                      {"gaussians", a.cfg.gaussians},
                      {"tol", a.cfg.tolerance},
                      {"relative_step", a.cfg.relative_step},
                      {"lambda_vis", a.cfg.lambda_vis},
                      {"depth_mode", a.depth_mode},
                      {"free_position", a.cfg.free_position},
                      {"max_entries_per_class", a.cfg.max_entries_per_class}}},
                    {"max_rel_error", rep.max_rel_error},
                    {"checked", rep.checked},
                    {"nonsmooth", rep.nonsmooth},
                    {"by_class", by_class},
                    {"worst",
                     {{"view", rep.worst.view},
                      {"param", param_class_name(rep.worst.param)},
                      {"index", rep.worst.index},
                      {"analytic", rep.worst.analytic},
                      {"numeric", rep.worst.numeric}}},
                    {"passed", rep.passed}};
    if (!a.out.empty()) {
        ensure_parent(a.out);
        write_json(a.out, j);
    }
    std::cout << j.dump(2) << "\n";
    return rep.passed ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- align

struct AlignArgs {
    std::string checkpoint;
    std::string image;
    std::string init_camera;
    int iters = 500;
    std::string out;
    AlignConfig cfg;
};

int
run_align(AlignArgs a) {
    a.cfg.iterations = a.iters;
    if (a.iters < 0) {
        throw UsageError("--iters must be non-negative");
    }
    const Scene scene = load_checkpoint(a.checkpoint);
    const Image target = read_ppm(a.image);
    const Camera init = read_camera(a.init_camera);
    const AlignResult res = align_test_view(materialize_scene(scene), target, init, a.cfg);
    const json echo = {{"command", "align"},
                       {"checkpoint", a.checkpoint},
                       {"image", a.image},
                       {"init_camera", a.init_camera},
                       {"iters", a.cfg.iterations},
                       {"lr_rotation", a.cfg.lr_rotation},
                       {"lr_translation", a.cfg.lr_translation},
                       {"final_lr_fraction", a.cfg.final_lr_fraction},
                       {"lambda_dssim", a.cfg.lambda_dssim},
                       {"sh_degree", a.cfg.sh_degree}};
    if (!a.out.empty()) {
        ensure_parent(a.out);
        write_camera(a.out, res.camera);
        write_json(output_dir_of(a.out) / "align_config.json",
                   {{"config", echo},
                    {"initial_loss", res.initial_loss},
                    {"best_loss", res.best_loss},
                    {"history", res.history}});
    }
    std::cout << json{{"camera", camera_to_json(res.camera)},
                      {"initial_loss", res.initial_loss},
                      {"best_loss", res.best_loss}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

} // namespace

int
main(int argc, char **argv) {
    CLI::App app{"dofsplat: DoF-separated Gaussian splatting on a desk-scale CPU pipeline"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto *synth = app.add_subcommand("synth", "Ray-cast a synthetic dataset with perturbed per-view depths");
    synth->add_option("--spec", sa.kind, "two_planes | sphere_on_plane | box_room")->required();
    synth->add_option("--views", sa.views, "training views")->capture_default_str();
    synth->add_option("--size", sa.size, "image size WxH")->capture_default_str();
    synth->add_option("--seed", sa.seed)->capture_default_str();
    synth->add_option("--noise-sigma", sa.noise_sigma, "iid depth noise, fraction of depth")->capture_default_str();
    synth->add_option("--bump-amp", sa.bump_amp, "texture-correlated depth bumps, fraction of depth")
        ->capture_default_str();
    synth->add_option("--texture", sa.texture, "checker | stripes | noise");
    synth->add_option("--frequency", sa.frequency, "texture cycles per world unit");
    synth->add_option("--out", sa.out)->required();

    TrainArgs ta;
    auto *trainc = app.add_subcommand("train", "Refine the per-view Gaussians of a dataset");
    trainc->add_option("--data", ta.data)->required();
    trainc->add_option("--out", ta.out)->required();
    trainc->add_option("--iters", ta.iters);
    trainc->add_option("--seed", ta.seed);
    trainc->add_flag("--no-vis-loss", ta.no_vis, "disable the visibility loss");
    trainc->add_flag("--freeze-offsets", ta.freeze, "keep the bounded offsets at their initial value");
    trainc->add_flag("--naive", ta.naive, "free 3D positions instead of the separated parameterization");
    trainc->add_option("--config", ta.config, "JSON file with TrainConfig fields");
    trainc->add_option("--stride", ta.stride, "pixel stride of the Gaussian grid");
    trainc->add_option("--depth-mode", ta.depth_mode, "normalized | accumulated");
    trainc->add_option("--log-every", ta.log_every, "progress line period, 0 disables")->capture_default_str();

    RenderArgs ra;
    auto *renderc = app.add_subcommand("render", "Render a checkpoint from a camera");
    renderc->add_option("--checkpoint", ra.checkpoint)->required();
    renderc->add_option("--camera", ra.camera)->required();
    renderc->add_option("--out-color", ra.out_color)->required();
    renderc->add_option("--out-depth", ra.out_depth)->required();
    renderc->add_option("--sh-degree", ra.sh_degree)->capture_default_str();
    renderc->add_option("--depth-mode", ra.depth_mode)->capture_default_str();

    EvalArgs ea;
    double min_pdc = 0.0, min_psnr = 0.0;
    auto *evalc = app.add_subcommand("eval", "Score a checkpoint against the clean ground truth");
    evalc->add_option("--checkpoint", ea.checkpoint)->required();
    evalc->add_option("--data", ea.data)->required();
    evalc->add_option("--patch", ea.patch)->capture_default_str();
    evalc->add_option("--out", ea.out)->required();
    evalc->add_option("--overlay", ea.overlay, "directory for PDC overlay images");
    auto *min_pdc_opt = evalc->add_option("--min-pdc", min_pdc, "exit 2 when the mean PDC is lower");
    auto *min_psnr_opt = evalc->add_option("--min-psnr", min_psnr, "exit 2 when the mean PSNR is lower");

    GradcheckArgs ga;
    auto *gradc = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
    gradc->add_option("--seed", ga.cfg.seed)->capture_default_str();
    gradc->add_option("--size", ga.cfg.size)->capture_default_str();
    gradc->add_option("--gaussians", ga.cfg.gaussians)->capture_default_str();
    gradc->add_option("--tol", ga.cfg.tolerance)->capture_default_str();
    gradc->add_option("--step", ga.cfg.relative_step, "relative finite-difference step")->capture_default_str();
    gradc->add_option("--max-entries", ga.cfg.max_entries_per_class, "entries per class, 0 = all")
        ->capture_default_str();
    gradc->add_option("--depth-mode", ga.depth_mode)->capture_default_str();
    gradc->add_flag("--free-position", ga.cfg.free_position);
    gradc->add_option("--out", ga.out, "also write the report JSON here");

    AlignArgs aa;
    auto *alignc = app.add_subcommand("align", "Recover a test-view pose against frozen Gaussians");
    alignc->add_option("--checkpoint", aa.checkpoint)->required();
    alignc->add_option("--image", aa.image)->required();
    alignc->add_option("--init-camera", aa.init_camera)->required();
    alignc->add_option("--iters", aa.iters)->capture_default_str();
    alignc->add_option("--out", aa.out, "aligned camera JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitError;
    }

    try {
        if (*synth) return run_synth(sa);
        if (*trainc) return run_train(ta, *trainc);
        if (*renderc) return run_render(ra);
        if (*evalc) {
            if (min_pdc_opt->count()) ea.min_pdc = min_pdc;
            if (min_psnr_opt->count()) ea.min_psnr = min_psnr;
            return run_eval(ea);
        }
        if (*gradc) return run_gradcheck_cmd(ga);
        if (*alignc) return run_align(aa);
    } catch (const std::exception &e) {
        // Contract, format, spec, domain and filesystem errors all land here.
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
