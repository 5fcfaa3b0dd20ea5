// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "dofsplat/geometry.hpp"
#include "dofsplat/image.hpp"
#include "dofsplat/losses.hpp"
#include "dofsplat/rasterizer.hpp"
#include "dofsplat/scene.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace dofsplat {

struct LearningRates {
    double log_depth = 1e-3;
    double raw_offset = 1e-2;
    double log_scale = 5e-3;
    double rotation = 1e-3;
    double opacity_logit = 5e-2;
    double sh = 2.5e-3;
    double free_mean = 1e-3; // free-position baseline only

    double of(ParamClass pc) const;
};

struct TrainConfig {
    long iterations = 10000;
    LearningRates lr;
    double lambda_dssim = 0.2;
    double lambda_vis = 1.0;
    double alpha_mask_threshold = 0.5;
    long stage_iters = 2000;
    int stage_long_side = 512;
    long sh_step = 100;
    double scale_clip_px = 30.0;
    std::uint64_t seed = 0;
    bool disable_vis_loss = false;
    bool freeze_offsets = false;
    bool naive_free_position = false;
    DepthMode depth_mode = DepthMode::Normalized;
    int stride = 1;

    void validate() const;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-15;

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState &state, double lr,
               double beta1 = kAdamBeta1, double beta2 = kAdamBeta2, double eps = kAdamEps);

struct ObjectiveSettings {
    int sh_degree = kMaxShDegree;
    int render_width = 0; // 0 selects the view's native size
    int render_height = 0;
    double lambda_dssim = 0.2;
    double vis_weight = 1.0;
    double alpha_threshold = 0.5;
    DepthMode depth_mode = DepthMode::Normalized;
};

struct ObjectiveResult {
    LossBreakdown loss;
    RenderOutput render;
    std::vector<GradientBuffers> grads; // one per scene view; empty without gradients
};

/// Renders view `view` of the scene and scores it against `target`:
/// (1−λs)·L1 + λs·D-SSIM + w·L_vis, where L_vis compares the rendered depth with
/// the view's own per-view depth map.
ObjectiveResult evaluate_objective(const Scene &scene, int view, const Image &target, const ObjectiveSettings &settings,
                                   bool with_gradient);

/// Projects log_scale so no Gaussian's pre-dilation 3σ screen radius exceeds `max_px`
/// in any of `cameras`. Returns how many Gaussians were clipped.
std::size_t scale_clip(Scene &scene, std::span<const Camera> cameras, double max_px = 30.0);

/// Largest pre-dilation 3σ screen radius of `g` over the cameras in which it is not culled; 0 if none.
double max_screen_radius(const MaterializedGaussian &g, std::span<const Camera> cameras);

using ProgressSink = std::function<void(long iteration, const LossBreakdown &)>;

struct TrainResult {
    Scene scene;
    std::vector<LossBreakdown> history;
};

class NonFiniteLossError : public std::runtime_error {
  public:
    NonFiniteLossError(long iteration, const LossBreakdown &loss, Scene snapshot);

    long iteration() const noexcept { return mIteration; }
    const LossBreakdown &loss() const noexcept { return mLoss; }
    const Scene &snapshot() const noexcept { return mSnapshot; }

  private:
    long mIteration;
    LossBreakdown mLoss;
    Scene mSnapshot;
};

/// Converts every view to the free-position baseline: means become raw parameters
/// initialized at the current materialized positions.
void convert_to_free_position(Scene &scene);

/// Round-robin refinement over the training views. `targets[i]` is the image of scene view i.
TrainResult train(Scene scene, std::span<const Image> targets, const TrainConfig &cfg, const ProgressSink &sink = {});

struct AlignConfig {
    int iterations = 500;
    double lr_rotation = 2e-3;          // radians
    double lr_translation = 1e-3;       // fraction of the median scene depth seen from the initial pose
    double final_lr_fraction = 0.05;    // exponential decay target
    double lambda_dssim = 0.2;
    int sh_degree = kMaxShDegree;
};

struct AlignResult {
    Camera camera;
    double initial_loss = 0.0;
    double best_loss = 0.0;
    std::vector<double> history;
};

/// Optimizes only the extrinsics of `init` (axis-angle rotation and translation
/// increments composed on the right) against the photometric loss of the frozen
/// Gaussians. Returns the pose with the lowest loss seen.
AlignResult align_test_view(std::span<const MaterializedGaussian> gaussians, const Image &target, const Camera &init,
                            const AlignConfig &cfg = {});

/// init ∘ (exp(ω), τ): rotation R0·exp(ω), center t0 + R0·τ.
Camera apply_pose_increment(const Camera &init, const Eigen::Vector3d &omega, const Eigen::Vector3d &tau);

} // namespace dofsplat
