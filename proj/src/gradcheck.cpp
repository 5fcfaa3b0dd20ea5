// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/gradcheck.hpp"

#include "dofsplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

namespace dofsplat {

namespace {

// Largest divisor of n not exceeding √n, so the second view is as square as possible.
std::array<int, 2>
near_square_dims(int n) {
    int h = static_cast<int>(std::sqrt(static_cast<double>(n)));
    while (h > 1 && n % h != 0) {
        --h;
    }
    return {n / h, h};
}

Image
smooth_target(int w, int h, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
    std::uniform_real_distribution<double> freq(0.05, 0.35);
    Image img(w, h, 3);
    for (int c = 0; c < 3; ++c) {
        const double fx = freq(rng), fy = freq(rng), p0 = phase(rng), p1 = phase(rng);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                img.at(x, y, c) = 0.5 + 0.3 * std::sin(fx * x + p0) * std::cos(fy * y + p1);
            }
        }
    }
    return img;
}

void
randomize_view(ViewParameters &vp, const Camera &cam, double screen_sigma_px, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    const std::size_t n = vp.count();
    const double tilt_x = 0.4 * (u01(rng) - 0.5), tilt_y = 0.4 * (u01(rng) - 0.5);
    const double f = 0.5 * (cam.fx + cam.fy);
    for (std::size_t k = 0; k < n; ++k) {
        const PixelIndex px = vp.pixel_of(k);
        const double xn = (px.i + 0.5 - cam.cx) / cam.width, yn = (px.j + 0.5 - cam.cy) / cam.height;
        const double depth = 3.0 * (1.0 + tilt_x * xn + tilt_y * yn) * (1.0 + 0.05 * n01(rng));
        vp.log_depth[k] = std::log(depth);
        vp.raw_offset[2 * k] = 1.2 * (u01(rng) - 0.5);
        vp.raw_offset[2 * k + 1] = 1.2 * (u01(rng) - 0.5);
        for (int a = 0; a < 3; ++a) {
            const double sigma_px = screen_sigma_px * (0.7 + 0.6 * u01(rng));
            vp.log_scale[3 * k + a] = std::log(sigma_px * depth / f);
        }
        Eigen::Vector4d q(1.0 + 0.5 * n01(rng), 0.5 * n01(rng), 0.5 * n01(rng), 0.5 * n01(rng));
        for (int a = 0; a < 4; ++a) {
            vp.rotation[4 * k + a] = q[a];
        }
        vp.opacity_logit[k] = -0.5 + 2.0 * u01(rng);
        for (int b = 0; b < kShBases; ++b) {
            for (int c = 0; c < 3; ++c) {
                const double v = b == 0 ? (0.25 + 0.5 * u01(rng) - 0.5) / kShC0 : 0.08 * n01(rng);
                vp.sh_coeffs[3 * b + c + 48 * k] = v;
            }
        }
    }
}

ViewParameters
empty_view(const Camera &cam, int stride) {
    ViewParameters vp;
    const auto dims = grid_dims(cam, stride);
    vp.grid_width = dims[0];
    vp.grid_height = dims[1];
    vp.stride = stride;
    const std::size_t n = vp.count();
    vp.log_depth.assign(n, 0.0);
    vp.raw_offset.assign(2 * n, 0.0);
    vp.log_scale.assign(3 * n, 0.0);
    vp.rotation.assign(4 * n, 0.0);
    vp.opacity_logit.assign(n, 0.0);
    vp.sh_coeffs.assign(static_cast<std::size_t>(kShCoeffs) * n, 0.0);
    return vp;
}

Pose
jittered_pose(const Eigen::Vector3d &center, double max_angle, std::mt19937_64 &rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const Eigen::Vector3d w(n01(rng), n01(rng), n01(rng));
    return Pose{so3_exp(max_angle * w.normalized() * std::abs(n01(rng)) / 3.0), center};
}

} // namespace

GradcheckProblem
make_gradcheck_problem(const GradcheckConfig &cfg) {
    if (cfg.size < 4 || cfg.gaussians < 2) {
        throw ContractError("gradcheck: need size >= 4 and at least 2 Gaussians");
    }
    if (!(cfg.tolerance > 0.0)) {
        throw ContractError("gradcheck: tolerance must be positive");
    }
    std::mt19937_64 rng(cfg.seed);
    const int n = cfg.size;

    // Main view: smallest stride whose grid leaves at least one Gaussian for the second view.
    int stride = 1;
    while ((n + stride - 1) / stride * ((n + stride - 1) / stride) > cfg.gaussians - 1) {
        ++stride;
    }
    const int g0 = ((n + stride - 1) / stride) * ((n + stride - 1) / stride);
    const auto [w1, h1] = near_square_dims(cfg.gaussians - g0);

    Camera cam0;
    cam0.width = cam0.height = n;
    cam0.fx = cam0.fy = static_cast<double>(n);
    cam0.cx = cam0.cy = 0.5 * n;
    cam0.cam_to_world = jittered_pose(Eigen::Vector3d::Zero(), 0.05, rng);

    Camera cam1;
    cam1.width = w1;
    cam1.height = h1;
    cam1.fx = cam1.fy = static_cast<double>(w1);
    cam1.cx = 0.5 * w1;
    cam1.cy = 0.5 * h1;
    cam1.cam_to_world = jittered_pose(Eigen::Vector3d(0.15, -0.05, 0.05), 0.05, rng);

    GradcheckProblem p;
    SceneView v0{cam0, empty_view(cam0, stride)};
    SceneView v1{cam1, empty_view(cam1, 1)};
    randomize_view(v0.params, cam0, 0.6 * stride, rng);
    // Second-view Gaussians cover a few main-view pixels each.
    randomize_view(v1.params, cam1, 2.0 * static_cast<double>(w1) / n, rng);
    p.scene.views = {std::move(v0), std::move(v1)};
    if (cfg.free_position) {
        convert_to_free_position(p.scene);
    }
    p.targets = {smooth_target(cam0.width, cam0.height, rng), smooth_target(cam1.width, cam1.height, rng)};
    p.settings.sh_degree = kMaxShDegree;
    p.settings.lambda_dssim = 0.2;
    p.settings.vis_weight = cfg.lambda_vis;
    p.settings.alpha_threshold = 0.5;
    p.settings.depth_mode = cfg.depth_mode;
    return p;
}

double
total_objective(const Scene &scene, std::span<const Image> targets, const ObjectiveSettings &settings,
                std::vector<GradientBuffers> *grads) {
    if (targets.size() != scene.views.size()) {
        throw ContractError("total_objective: one target per view required");
    }
    double total = 0.0;
    if (grads) {
        grads->clear();
        for (const SceneView &v : scene.views) {
            grads->push_back(GradientBuffers::zeros_like(v.params));
        }
    }
    for (std::size_t v = 0; v < scene.views.size(); ++v) {
        const ObjectiveResult r = evaluate_objective(scene, static_cast<int>(v), targets[v], settings, grads != nullptr);
        total += r.loss.total;
        if (grads) {
            for (std::size_t w = 0; w < scene.views.size(); ++w) {
                for (ParamClass pc : kAllParamClasses) {
                    auto &dst = (*grads)[w][pc];
                    const auto &src = r.grads[w][pc];
                    for (std::size_t i = 0; i < dst.size(); ++i) {
                        dst[i] += src[i];
                    }
                }
            }
        }
    }
    return total;
}

double
gradient_relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

GradcheckReport
run_gradcheck(const GradcheckConfig &cfg) {
    return run_gradcheck(make_gradcheck_problem(cfg), cfg);
}

GradcheckReport
run_gradcheck(const GradcheckProblem &problem, const GradcheckConfig &cfg) {
    std::vector<GradientBuffers> analytic;
    const double f0 = total_objective(problem.scene, problem.targets, problem.settings, &analytic);

    GradcheckReport rep;
    Scene work = problem.scene;
    std::mt19937_64 pick(cfg.seed ^ 0x5bd1e995ULL);
    for (std::size_t v = 0; v < work.views.size(); ++v) {
        for (ParamClass pc : kAllParamClasses) {
            std::vector<double> &theta = work.views[v].params[pc];
            if (theta.empty()) {
                continue;
            }
            std::vector<std::size_t> idx(theta.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            if (cfg.max_entries_per_class > 0 && idx.size() > cfg.max_entries_per_class) {
                std::shuffle(idx.begin(), idx.end(), pick);
                idx.resize(cfg.max_entries_per_class);
                std::sort(idx.begin(), idx.end());
            }
            const auto cls = static_cast<std::size_t>(pc);
            for (std::size_t i : idx) {
                const double orig = theta[i];
                const double a = analytic[v][pc][i];
                auto eval_at = [&](double offset) {
                    theta[i] = orig + offset;
                    const double f = total_objective(work, problem.targets, problem.settings);
                    theta[i] = orig;
                    return f;
                };
                // A stencil that straddles a kink (L1 sign change, alpha-mask flip, cull
                // boundary, depth-order swap) is retried with a shorter step.
                std::optional<double> numeric;
                double h = cfg.relative_step * std::max(1.0, std::abs(orig));
                for (int attempt = 0; attempt < 3 && !numeric; ++attempt, h /= 8.0) {
                    const double fm2 = eval_at(-2 * h), fm1 = eval_at(-h), fp1 = eval_at(h), fp2 = eval_at(2 * h);
                    const double n = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h);
                    // Third differences of a smooth function are O(h³); a jump or kink
                    // shows up far larger. The threshold sits below the smallest defect
                    // that could push the estimate past the tolerance.
                    const double d1 = fm1 - fm2, d2 = f0 - fm1, d3 = fp1 - f0, d4 = fp2 - fp1;
                    const double third = std::max(std::abs(d3 - 2 * d2 + d1), std::abs(d4 - 2 * d3 + d2));
                    const double scale = std::max({std::abs(a), std::abs(n), 1e-6});
                    if (third <= 0.5 * cfg.tolerance * h * scale || third <= 64 * 2.2e-16 * std::abs(f0)) {
                        numeric = n;
                    }
                }
                if (!numeric) {
                    ++rep.nonsmooth;
                    continue;
                }
                const double err = gradient_relative_error(a, *numeric);
                ++rep.checked;
                ++rep.checked_by_class[cls];
                rep.max_rel_error_by_class[cls] = std::max(rep.max_rel_error_by_class[cls], err);
                if (err >= rep.max_rel_error) {
                    rep.max_rel_error = err;
                    rep.worst = {static_cast<int>(v), pc, i, a, *numeric, err};
                }
            }
        }
    }
    // A stencil straddling a discontinuity says nothing about the derivative, but a
    // check that skipped a large share of entries would not be evidence either.
    rep.passed = rep.checked > 0 && rep.max_rel_error <= cfg.tolerance && rep.nonsmooth * 100 <= rep.checked;
    return rep;
}

} // namespace dofsplat
