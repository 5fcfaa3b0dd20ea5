// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Glue between datasets, training and evaluation, shared by the CLI and bindings.
#pragma once

#include "dofsplat/metrics.hpp"
#include "dofsplat/scene.hpp"
#include "dofsplat/synthetic.hpp"
#include "dofsplat/training.hpp"

#include <json.hpp>

#include <vector>

namespace dofsplat {

/// One view per dataset view, initialized from its image and per-view depth.
Scene initial_scene(const Dataset &data, int stride = 1);

std::vector<Image> training_targets(const Dataset &data);

struct ViewDepthEval {
    PdcResult pdc;            // Gaussian depth map vs clean depth
    double depth_rmse = 0.0;  // same pair
    PdcResult rendered_pdc;   // rendered depth vs clean depth, full resolution
    double rendered_depth_rmse = 0.0;
};

struct ViewImageEval {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalReport {
    int patch_size = kDefaultPatchSize;
    std::vector<ViewDepthEval> depth;  // per training view
    std::vector<ViewImageEval> images; // held-out views, or training views when none are held out
    bool held_out = false;
    double pdc = 0.0;                  // mean over training views
    double depth_rmse = 0.0;           // root of the pooled mean squared error
    double rendered_pdc = 0.0;
    double rendered_depth_rmse = 0.0;
    double psnr = 0.0;                 // mean over `images`
    double ssim = 0.0;
};

/// Scores `scene` against the clean ground truth in `data` (which must have been
/// loaded with ground truth). The Gaussian depth map of each view is compared
/// with the clean depth sampled at the view's grid pixels.
EvalReport evaluate_scene(const Scene &scene, const Dataset &data, int patch = kDefaultPatchSize,
                          int sh_degree = kMaxShDegree);

nlohmann::json eval_report_to_json(const EvalReport &report);

/// Clean depth at the grid pixels of `vp` (identity when the stride is 1).
Image sample_on_grid(const Image &full, const ViewParameters &vp);

double depth_rmse(const Image &a, const Image &b);

} // namespace dofsplat
