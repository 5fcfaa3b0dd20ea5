// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Real spherical harmonics up to degree 3 for view-dependent color. Coefficients
// are stored as 16 bases × 3 channels, basis-major.
#pragma once

#include <Eigen/Core>

#include <array>
#include <span>

namespace dofsplat {

inline constexpr int kShBases = 16;
inline constexpr int kShCoeffs = kShBases * 3;
inline constexpr int kMaxShDegree = 3;

inline constexpr double kShC0 = 0.28209479177387814;

using ShCoeffs = std::array<double, kShCoeffs>;

inline constexpr int sh_bases_for_degree(int degree) { return (degree + 1) * (degree + 1); }

/// Basis values and their gradient with respect to the direction.
struct ShBasis {
    std::array<double, kShBases> value{};
    std::array<Eigen::Vector3d, kShBases> grad{};
};

ShBasis sh_basis(const Eigen::Vector3d &dir, int active_degree);

/// Color = Σ basis·coeff + 0.5, clamped at 0 from below. Throws DomainError for a
/// non-unit direction (tolerance 1e-6) or a degree outside 0..3.
Eigen::Vector3d sh_eval(std::span<const double, kShCoeffs> coeffs, const Eigen::Vector3d &dir, int active_degree);

struct ShGradient {
    ShCoeffs d_coeffs{};
    Eigen::Vector3d d_dir = Eigen::Vector3d::Zero();
};

/// Adjoint of sh_eval; channels clamped in the forward pass pass no gradient.
ShGradient sh_eval_backward(std::span<const double, kShCoeffs> coeffs, const Eigen::Vector3d &dir,
                            int active_degree, const Eigen::Vector3d &d_rgb);

} // namespace dofsplat
