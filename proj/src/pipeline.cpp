// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/pipeline.hpp"

#include "dofsplat/error.hpp"
#include "dofsplat/losses.hpp"
#include "dofsplat/rasterizer.hpp"

#include <cmath>

namespace dofsplat {

Scene
initial_scene(const Dataset &data, int stride) {
    if (data.views.empty()) {
        throw ContractError("initial_scene: dataset has no views");
    }
    Scene scene;
    for (const DatasetView &v : data.views) {
        scene.views.push_back({v.camera, initialize_view(v.camera, v.image, v.depth, stride)});
    }
    return scene;
}

std::vector<Image>
training_targets(const Dataset &data) {
    std::vector<Image> out;
    out.reserve(data.views.size());
    for (const DatasetView &v : data.views) {
        out.push_back(v.image);
    }
    return out;
}

Image
sample_on_grid(const Image &full, const ViewParameters &vp) {
    if (vp.stride == 1 && full.width == vp.grid_width && full.height == vp.grid_height) {
        return full;
    }
    Image out(vp.grid_width, vp.grid_height, 1);
    for (std::size_t k = 0; k < vp.count(); ++k) {
        const PixelIndex px = vp.pixel_of(k);
        out.data[k] = full.at(px.i, px.j);
    }
    return out;
}

double
depth_rmse(const Image &a, const Image &b) {
    if (!a.same_shape(b) || a.data.empty()) {
        throw ContractError("depth_rmse: shape mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(a.data.size()));
}

EvalReport
evaluate_scene(const Scene &scene, const Dataset &data, int patch, int sh_degree) {
    if (scene.views.size() != data.views.size() || data.ground_truth_depth.size() != data.views.size()) {
        throw ContractError("evaluate_scene: scene, dataset views and ground truth depths must correspond");
    }
    EvalReport rep;
    rep.patch_size = patch;
    const auto gaussians = materialize_scene(scene);
    const RenderOptions ropts{sh_degree, DepthMode::Normalized};

    double sq = 0.0, rsq = 0.0;
    std::size_t n = 0, rn = 0;
    for (std::size_t v = 0; v < scene.views.size(); ++v) {
        const SceneView &sv = scene.views[v];
        const Image &gt = data.ground_truth_depth[v];
        if (gt.width != sv.camera.width || gt.height != sv.camera.height) {
            throw ContractError("evaluate_scene: ground truth depth size disagrees with the view camera");
        }
        ViewDepthEval e;
        const Image pred = gaussian_depth_map(sv.params, sv.camera);
        const Image ref = sample_on_grid(gt, sv.params);
        e.pdc = pdc(pred, ref, patch);
        e.depth_rmse = depth_rmse(pred, ref);
        sq += e.depth_rmse * e.depth_rmse * static_cast<double>(pred.data.size());
        n += pred.data.size();

        const RenderOutput r = render(gaussians, sv.camera, ropts);
        e.rendered_pdc = pdc(r.depth, gt, patch);
        e.rendered_depth_rmse = depth_rmse(r.depth, gt);
        rsq += e.rendered_depth_rmse * e.rendered_depth_rmse * static_cast<double>(gt.data.size());
        rn += gt.data.size();

        rep.pdc += e.pdc.mean;
        rep.rendered_pdc += e.rendered_pdc.mean;
        rep.depth.push_back(std::move(e));
    }
    rep.pdc /= static_cast<double>(scene.views.size());
    rep.rendered_pdc /= static_cast<double>(scene.views.size());
    rep.depth_rmse = std::sqrt(sq / static_cast<double>(n));
    rep.rendered_depth_rmse = std::sqrt(rsq / static_cast<double>(rn));

    rep.held_out = !data.test_views.empty();
    const auto &image_views = rep.held_out ? data.test_views : data.views;
    for (const DatasetView &v : image_views) {
        const RenderOutput r = render(gaussians, v.camera, ropts);
        ViewImageEval e{v.name, psnr(r.color, v.image), ssim(r.color, v.image).value};
        rep.psnr += e.psnr;
        rep.ssim += e.ssim;
        rep.images.push_back(std::move(e));
    }
    rep.psnr /= static_cast<double>(rep.images.size());
    rep.ssim /= static_cast<double>(rep.images.size());
    return rep;
}

nlohmann::json
eval_report_to_json(const EvalReport &rep) {
    nlohmann::json views = nlohmann::json::array();
    nlohmann::json per_patch = nlohmann::json::array();
    nlohmann::json shapes = nlohmann::json::array();
    std::size_t pixels = 0;
    for (std::size_t v = 0; v < rep.depth.size(); ++v) {
        const ViewDepthEval &e = rep.depth[v];
        // One row-major grid per training view; shapes are listed alongside as [rows, cols].
        per_patch.push_back(e.pdc.per_patch);
        shapes.push_back({e.pdc.patches_y, e.pdc.patches_x});
        pixels += e.pdc.pixels_evaluated;
        views.push_back({{"view", v},
                         {"pdc", e.pdc.mean},
                         {"depth_rmse", e.depth_rmse},
                         {"rendered_pdc", e.rendered_pdc.mean},
                         {"rendered_depth_rmse", e.rendered_depth_rmse}});
    }
    nlohmann::json images = nlohmann::json::array();
    for (const ViewImageEval &e : rep.images) {
        images.push_back({{"name", e.name}, {"psnr", e.psnr}, {"ssim", e.ssim}});
    }
    return {{"pdc", rep.pdc},
            {"depth_rmse", rep.depth_rmse},
            {"rendered_pdc", rep.rendered_pdc},
            {"rendered_depth_rmse", rep.rendered_depth_rmse},
            {"psnr", rep.psnr},
            {"ssim", rep.ssim},
            {"patch_size", rep.patch_size},
            {"per_patch", per_patch},
            {"per_patch_shape", shapes},
            {"pixels_evaluated", pixels},
            {"views", views},
            {"image_views", images},
            {"image_views_held_out", rep.held_out}};
}

} // namespace dofsplat
