// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference verification of the analytic training gradients.
#pragma once

#include "dofsplat/scene.hpp"
#include "dofsplat/training.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace dofsplat {

struct GradcheckConfig {
    std::uint64_t seed = 0;
    int size = 16;       // main view is size × size pixels
    int gaussians = 20;  // total Gaussians across both views
    double tolerance = 1e-5;
    /// Finite-difference step relative to max(1, |θ|). The five-point stencil is
    /// fourth-order, so a step this size keeps truncation far below roundoff.
    double relative_step = 1e-4;
    double lambda_vis = 1.0;
    DepthMode depth_mode = DepthMode::Normalized;
    bool free_position = false;
    /// Entries checked per (view, class); 0 checks every entry.
    std::size_t max_entries_per_class = 0;
};

/// A small random two-view problem: the main view at size × size pixels on a
/// stride grid, plus a low-resolution second view that supplies the remaining Gaussians.
struct GradcheckProblem {
    Scene scene;
    std::vector<Image> targets;
    ObjectiveSettings settings;
};

GradcheckProblem make_gradcheck_problem(const GradcheckConfig &cfg);

/// Σ over views of the training objective (render, photometric and visibility terms).
double total_objective(const Scene &scene, std::span<const Image> targets, const ObjectiveSettings &settings,
                       std::vector<GradientBuffers> *grads = nullptr);

struct GradcheckEntry {
    int view = 0;
    ParamClass param = ParamClass::LogDepth;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradcheckReport {
    double max_rel_error = 0.0;
    std::array<double, kAllParamClasses.size()> max_rel_error_by_class{};
    std::array<std::size_t, kAllParamClasses.size()> checked_by_class{};
    std::size_t checked = 0;
    /// Entries whose stencil straddles a discontinuity of the loss (mask flip, cull
    /// boundary, depth-order swap). Detected by disagreement of two step sizes.
    std::size_t nonsmooth = 0;
    GradcheckEntry worst;
    bool passed = false;
};

/// |a − n| / max(|a|, |n|, 1e-6).
double gradient_relative_error(double analytic, double numeric);

GradcheckReport run_gradcheck(const GradcheckConfig &cfg);
GradcheckReport run_gradcheck(const GradcheckProblem &problem, const GradcheckConfig &cfg);

} // namespace dofsplat
