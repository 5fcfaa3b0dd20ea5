// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/training.hpp"

#include "dofsplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dofsplat {

double
LearningRates::of(ParamClass pc) const {
    switch (pc) {
    case ParamClass::LogDepth: return log_depth;
    case ParamClass::RawOffset: return raw_offset;
    case ParamClass::LogScale: return log_scale;
    case ParamClass::Rotation: return rotation;
    case ParamClass::OpacityLogit: return opacity_logit;
    case ParamClass::Sh: return sh;
    case ParamClass::FreeMean: return free_mean;
    }
    return 0.0;
}

void
TrainConfig::validate() const {
    if (iterations < 0) {
        throw ContractError("train config: iterations must be non-negative");
    }
    for (ParamClass pc : kAllParamClasses) {
        if (!(lr.of(pc) > 0.0)) {
            throw ContractError(std::string("train config: learning rate for ") + param_class_name(pc) +
                                " must be positive");
        }
    }
    if (lambda_dssim < 0.0 || lambda_dssim > 1.0 || lambda_vis < 0.0) {
        throw ContractError("train config: loss weights out of range");
    }
    if (!(scale_clip_px > 0.0) || stage_long_side < 1 || sh_step < 1 || stride < 1 || stage_iters < 0) {
        throw ContractError("train config: schedule parameters out of range");
    }
}

void
adam_step(std::span<double> params, std::span<const double> grads, AdamState &state, double lr, double beta1,
          double beta2, double eps) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ContractError("adam_step: parameter, gradient and moment sizes differ");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

namespace {

Image
per_view_depth(const SceneView &view) {
    return gaussian_depth_map(view.params, view.camera);
}

bool
loss_finite(const LossBreakdown &l) {
    return std::isfinite(l.l1) && std::isfinite(l.dssim) && std::isfinite(l.visibility) && std::isfinite(l.total);
}

} // namespace

ObjectiveResult
evaluate_objective(const Scene &scene, int view, const Image &target, const ObjectiveSettings &settings,
                   bool with_gradient) {
    if (view < 0 || view >= static_cast<int>(scene.views.size())) {
        throw ContractError("evaluate_objective: view index out of range");
    }
    const SceneView &sv = scene.views[view];
    if (target.width != sv.camera.width || target.height != sv.camera.height || target.channels != 3) {
        throw ContractError("evaluate_objective: target image must be RGB at the view's resolution");
    }
    const int rw = settings.render_width > 0 ? settings.render_width : sv.camera.width;
    const int rh = settings.render_height > 0 ? settings.render_height : sv.camera.height;
    const Camera cam = rescaled(sv.camera, rw, rh);
    const Image target_r = resize_bilinear(target, rw, rh);
    const RenderOptions ropts{settings.sh_degree, settings.depth_mode};

    const std::vector<MaterializedGaussian> gaussians = materialize_scene(scene);
    ObjectiveResult res;
    RetainedRender forward = render_retained(gaussians, cam, ropts);
    res.render = with_gradient ? forward.output : std::move(forward.output);

    const PhotometricLoss photo = photometric_loss(res.render.color, target_r);
    const Image d_view = per_view_depth(sv);
    const VisibilityLoss vis =
        visibility_loss_resampled(res.render.depth, res.render.alpha, d_view, settings.alpha_threshold);

    const double ls = settings.lambda_dssim;
    const double lv = settings.vis_weight;
    res.loss.l1 = photo.l1;
    res.loss.dssim = photo.dssim;
    res.loss.visibility = vis.value;
    res.loss.vis_weight_used = lv;
    res.loss.masked_pixel_count = vis.masked;
    res.loss.total = (1.0 - ls) * photo.l1 + ls * photo.dssim + lv * vis.value;
    if (!with_gradient) {
        return res;
    }

    RenderUpstream up;
    up.d_color = Image(rw, rh, 3);
    for (std::size_t i = 0; i < up.d_color.data.size(); ++i) {
        up.d_color.data[i] = (1.0 - ls) * photo.d_l1.data[i] + ls * photo.d_dssim.data[i];
    }
    if (lv != 0.0) {
        up.d_depth = vis.d_rendered_depth;
        up.d_alpha = vis.d_alpha;
        for (double &v : up.d_depth.data) {
            v *= lv;
        }
        for (double &v : up.d_alpha.data) {
            v *= lv;
        }
    }
    const RenderGradients rg = render_backward(forward, gaussians, up);
    res.grads.reserve(scene.views.size());
    std::size_t offset = 0;
    for (const SceneView &v : scene.views) {
        const std::size_t n = v.params.count();
        res.grads.push_back(
            backprop_view(v.params, v.camera, std::span<const GaussianAdjoint>(rg.gaussians).subspan(offset, n)));
        offset += n;
    }
    if (lv != 0.0) {
        // Direct dependence of the loss on the view's own per-view depth.
        GradientBuffers &g = res.grads[view];
        const ViewParameters &vp = sv.params;
        for (std::size_t k = 0; k < vp.count(); ++k) {
            const double dd = lv * vis.d_per_view_depth.data[k];
            if (dd == 0.0) {
                continue;
            }
            if (vp.free_position()) {
                const Eigen::Vector3d axis = sv.camera.cam_to_world.rotation.col(2);
                for (int i = 0; i < 3; ++i) {
                    g.free_mean[3 * k + i] += dd * axis[i];
                }
            } else {
                g.log_depth[k] += dd * d_view.data[k];
            }
        }
    }
    return res;
}

double
max_screen_radius(const MaterializedGaussian &g, std::span<const Camera> cameras) {
    double r_max = 0.0;
    for (const Camera &cam : cameras) {
        if (!project_gaussian(g, cam)) {
            continue;
        }
        const Eigen::Matrix2d c = screen_covariance(g, cam);
        const double mid = 0.5 * (c(0, 0) + c(1, 1));
        const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
        const double lambda = mid + std::sqrt(std::max(0.0, mid * mid - det));
        r_max = std::max(r_max, kRadiusSigmas * std::sqrt(std::max(lambda, 0.0)));
    }
    return r_max;
}

std::size_t
scale_clip(Scene &scene, std::span<const Camera> cameras, double max_px) {
    if (!(max_px > 0.0)) {
        throw ContractError("scale_clip: max_px must be positive");
    }
    const double limit = max_px * (1.0 + 1e-12);
    std::vector<Eigen::Matrix3d> world_to_cam;
    for (const Camera &cam : cameras) {
        world_to_cam.push_back(cam.world_to_cam_rotation());
    }
    std::size_t clipped = 0;
    for (std::size_t v = 0; v < scene.views.size(); ++v) {
        SceneView &sv = scene.views[v];
        const auto gaussians = materialize_view(sv.params, sv.camera, static_cast<int>(v));
        for (std::size_t k = 0; k < gaussians.size(); ++k) {
            const MaterializedGaussian &g = gaussians[k];
            // Cheap upper bound first: λmax(T·Σ·Tᵀ) ≤ s_max²·‖J‖_F², since W is orthonormal.
            const double s_max = g.scale.maxCoeff();
            bool may_exceed = false;
            for (std::size_t c = 0; c < cameras.size() && !may_exceed; ++c) {
                const Camera &cam = cameras[c];
                const Eigen::Vector3d p = world_to_cam[c] * (g.mean - cam.cam_to_world.translation);
                if (!(p.z() > kMinCameraDepth)) {
                    continue;
                }
                const double z2 = p.z() * p.z();
                const double j2 = (cam.fx * cam.fx * (z2 + p.x() * p.x()) + cam.fy * cam.fy * (z2 + p.y() * p.y())) /
                                  (z2 * z2);
                may_exceed = kRadiusSigmas * s_max * std::sqrt(j2) > limit;
            }
            if (!may_exceed) {
                continue;
            }
            const double r = max_screen_radius(g, cameras);
            if (r > limit) {
                const double shift = std::log(max_px / r);
                for (int a = 0; a < 3; ++a) {
                    sv.params.log_scale[3 * k + a] += shift;
                }
                ++clipped;
            }
        }
    }
    return clipped;
}

NonFiniteLossError::NonFiniteLossError(long iteration, const LossBreakdown &loss, Scene snapshot)
    : std::runtime_error("non-finite loss at iteration " + std::to_string(iteration) + " (l1=" +
                         std::to_string(loss.l1) + ", dssim=" + std::to_string(loss.dssim) +
                         ", visibility=" + std::to_string(loss.visibility) + ")"),
      mIteration(iteration), mLoss(loss), mSnapshot(std::move(snapshot)) {}

void
convert_to_free_position(Scene &scene) {
    for (std::size_t v = 0; v < scene.views.size(); ++v) {
        SceneView &sv = scene.views[v];
        if (sv.params.free_position()) {
            continue;
        }
        const auto gaussians = materialize_view(sv.params, sv.camera, static_cast<int>(v));
        sv.params.free_mean.resize(3 * gaussians.size());
        for (std::size_t k = 0; k < gaussians.size(); ++k) {
            for (int i = 0; i < 3; ++i) {
                sv.params.free_mean[3 * k + i] = gaussians[k].mean[i];
            }
        }
    }
}

TrainResult
train(Scene scene, std::span<const Image> targets, const TrainConfig &cfg, const ProgressSink &sink) {
    cfg.validate();
    if (scene.views.empty()) {
        throw ContractError("train: scene has no views");
    }
    if (targets.size() != scene.views.size()) {
        throw ContractError("train: expected one target image per scene view");
    }
    TrainResult result;
    if (cfg.iterations == 0) {
        result.scene = std::move(scene);
        return result;
    }
    if (cfg.naive_free_position) {
        convert_to_free_position(scene);
    }
    const bool vis_enabled = !cfg.disable_vis_loss && !cfg.naive_free_position;

    std::vector<ParamClass> trained;
    if (cfg.naive_free_position) {
        trained.push_back(ParamClass::FreeMean);
    } else {
        trained.push_back(ParamClass::LogDepth);
        if (!cfg.freeze_offsets) {
            trained.push_back(ParamClass::RawOffset);
        }
    }
    for (ParamClass pc : {ParamClass::LogScale, ParamClass::Rotation, ParamClass::OpacityLogit, ParamClass::Sh}) {
        trained.push_back(pc);
    }

    std::vector<std::vector<AdamState>> adam(scene.views.size());
    for (std::size_t v = 0; v < scene.views.size(); ++v) {
        for (ParamClass pc : kAllParamClasses) {
            adam[v].emplace_back(scene.views[v].params[pc].size());
        }
    }
    std::vector<Camera> cameras;
    for (const SceneView &sv : scene.views) {
        cameras.push_back(sv.camera);
    }

    result.history.reserve(static_cast<std::size_t>(cfg.iterations));
    const int n_views = static_cast<int>(scene.views.size());
    for (long t = 0; t < cfg.iterations; ++t) {
        const int view = static_cast<int>(t % n_views);
        const Camera &cam = scene.views[view].camera;
        const auto [rw, rh] = render_resolution_at(t, cam.width, cam.height, cfg.stage_iters, cfg.stage_long_side);
        ObjectiveSettings settings;
        settings.sh_degree = sh_degree_at(t, cfg.sh_step);
        settings.render_width = rw;
        settings.render_height = rh;
        settings.lambda_dssim = cfg.lambda_dssim;
        settings.vis_weight = vis_enabled ? vis_weight(t, cfg.iterations, cfg.lambda_vis) : 0.0;
        settings.alpha_threshold = cfg.alpha_mask_threshold;
        settings.depth_mode = cfg.depth_mode;

        ObjectiveResult obj = evaluate_objective(scene, view, targets[view], settings, true);
        bool grads_ok = true;
        for (const GradientBuffers &g : obj.grads) {
            grads_ok = grads_ok && g.all_finite();
        }
        if (!loss_finite(obj.loss) || !grads_ok) {
            throw NonFiniteLossError(t, obj.loss, scene);
        }
        result.history.push_back(obj.loss);
        if (sink) {
            sink(t, obj.loss);
        }
        for (std::size_t v = 0; v < scene.views.size(); ++v) {
            for (ParamClass pc : trained) {
                const auto idx = static_cast<std::size_t>(pc);
                adam_step(scene.views[v].params[pc], obj.grads[v][pc], adam[v][idx], cfg.lr.of(pc));
            }
        }
        scale_clip(scene, cameras, cfg.scale_clip_px);
    }
    result.scene = std::move(scene);
    return result;
}

Camera
apply_pose_increment(const Camera &init, const Eigen::Vector3d &omega, const Eigen::Vector3d &tau) {
    Camera cam = init;
    const Eigen::Matrix3d &r0 = init.cam_to_world.rotation;
    cam.cam_to_world.rotation = r0 * so3_exp(omega);
    cam.cam_to_world.translation = init.cam_to_world.translation + r0 * tau;
    return cam;
}

AlignResult
align_test_view(std::span<const MaterializedGaussian> gaussians, const Image &target, const Camera &init,
                const AlignConfig &cfg) {
    init.validate();
    if (target.width != init.width || target.height != init.height || target.channels != 3) {
        throw ContractError("align_test_view: target must be RGB at the camera resolution");
    }
    AlignResult res;
    res.camera = init;
    if (cfg.iterations <= 0) {
        return res;
    }
    std::vector<double> depths;
    for (const MaterializedGaussian &g : gaussians) {
        const double z = init.to_camera(g.mean).z();
        if (z > kMinCameraDepth) {
            depths.push_back(z);
        }
    }
    double scene_depth = 1.0;
    if (!depths.empty()) {
        std::nth_element(depths.begin(), depths.begin() + static_cast<std::ptrdiff_t>(depths.size() / 2), depths.end());
        scene_depth = depths[depths.size() / 2];
    }

    const RenderOptions ropts{cfg.sh_degree, DepthMode::Normalized};
    std::vector<double> pose(6, 0.0); // ω, τ
    AdamState rot_state(3), trans_state(3);
    res.best_loss = std::numeric_limits<double>::infinity();
    const double decay = std::pow(cfg.final_lr_fraction, 1.0 / std::max(1, cfg.iterations - 1));

    for (int it = 0; it <= cfg.iterations; ++it) {
        const Eigen::Vector3d omega(pose[0], pose[1], pose[2]);
        const Eigen::Vector3d tau(pose[3], pose[4], pose[5]);
        const Camera cam = apply_pose_increment(init, omega, tau);
        const RetainedRender forward = render_retained(gaussians, cam, ropts);
        const RenderOutput &out = forward.output;
        const PhotometricLoss photo = photometric_loss(out.color, target);
        const double loss = (1.0 - cfg.lambda_dssim) * photo.l1 + cfg.lambda_dssim * photo.dssim;
        if (!std::isfinite(loss)) {
            throw NonFiniteLossError(it, LossBreakdown{photo.l1, photo.dssim, 0.0, loss, 0.0, 0}, Scene{});
        }
        if (it == 0) {
            res.initial_loss = loss;
        }
        res.history.push_back(loss);
        if (loss < res.best_loss) {
            res.best_loss = loss;
            res.camera = cam;
        }
        if (it == cfg.iterations) {
            break;
        }
        RenderUpstream up;
        up.d_color = Image(cam.width, cam.height, 3);
        for (std::size_t i = 0; i < up.d_color.data.size(); ++i) {
            up.d_color.data[i] = (1.0 - cfg.lambda_dssim) * photo.d_l1.data[i] + cfg.lambda_dssim * photo.d_dssim.data[i];
        }
        const RenderGradients rg = render_backward(forward, gaussians, up);
        const Eigen::Vector3d g_omega = so3_right_jacobian(omega).transpose() * rg.camera.d_rotation;
        const Eigen::Vector3d g_tau = init.cam_to_world.rotation.transpose() * rg.camera.d_center;
        const double lr_scale = std::pow(decay, it);
        const double g_rot[3] = {g_omega.x(), g_omega.y(), g_omega.z()};
        const double g_trans[3] = {g_tau.x(), g_tau.y(), g_tau.z()};
        adam_step(std::span<double>(pose).subspan(0, 3), g_rot, rot_state, cfg.lr_rotation * lr_scale);
        adam_step(std::span<double>(pose).subspan(3, 3), g_trans, trans_state,
                  cfg.lr_translation * scene_depth * lr_scale);
    }
    return res;
}

} // namespace dofsplat
