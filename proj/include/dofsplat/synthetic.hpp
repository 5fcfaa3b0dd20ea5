// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Analytic ground-truth scenes. Colors and depths come from closed-form ray
// intersections with planes, spheres and boxes; nothing here touches the rasterizer.
#pragma once

#include "dofsplat/geometry.hpp"
#include "dofsplat/image.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dofsplat {

enum class SceneKind { TwoPlanes, SphereOnPlane, BoxRoom };
enum class TextureKind { Checker, Stripes, Noise };

SceneKind parse_scene_kind(const std::string &name);
TextureKind parse_texture_kind(const std::string &name);
const char *scene_kind_name(SceneKind kind);
const char *texture_kind_name(TextureKind kind);

struct SyntheticSpec {
    SceneKind kind = SceneKind::TwoPlanes;
    TextureKind texture = TextureKind::Checker;
    double texture_frequency = 2.0; // cycles per world unit
    int views = 6;
    int width = 64;
    int height = 64;
    double fov_deg = 60.0;          // horizontal
    double ring_radius = 4.0;
    double arc_deg = 40.0;          // azimuth span of the camera ring
    double elevation_deg = 10.0;
    Eigen::Vector3d target = {0.0, -0.5, 0.0};
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;       // iid relative depth noise
    double bump_amp = 0.0;          // texture-correlated relative depth bump

    /// Scene defaults for `kind` (ring placement and target).
    static SyntheticSpec defaults(SceneKind kind);
    /// Throws SpecError on N < 2, W or H < 16, negative perturbations or degenerate placement.
    void validate() const;
};

/// Closest hit of the ray origin + t·dir (t > 0) with the scene.
struct SurfaceHit {
    double t = 0.0;
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    double texture = 0.0; // scalar texture value in [0,1] at the hit
};

std::optional<SurfaceHit> cast_ray(const SyntheticSpec &spec, const Eigen::Vector3d &origin,
                                   const Eigen::Vector3d &dir);

/// Texture value in [0,1] at surface coordinates (a, b).
double texture_value(const SyntheticSpec &spec, double a, double b);

struct RenderedView {
    Camera camera;
    Image color; // 3 channels
    Image depth; // camera-space z
    Image texture;
};

/// Exact camera for ring position `k` of `count` (azimuths evenly spanning the arc).
Camera ring_camera(const SyntheticSpec &spec, double azimuth_deg);
std::vector<Camera> training_cameras(const SyntheticSpec &spec);
/// Held-out cameras at the azimuth midpoints between consecutive training cameras.
std::vector<Camera> test_cameras(const SyntheticSpec &spec);

/// Ray-casts every pixel center. Throws SpecError if any ray misses the scene.
RenderedView ray_cast_view(const SyntheticSpec &spec, const Camera &cam);

/// D·(1 + σ·n + a·(2·tex − 1)) with n ~ N(0,1), floored at 0.5·D. Returns `depth`
/// bitwise when both magnitudes are zero.
Image perturb_depth(const Image &depth, const Image &texture, double sigma, double bump_amp, std::uint64_t seed);

struct DatasetView {
    std::string name;
    Camera camera;
    Image image;
    Image depth;
};

struct Dataset {
    std::vector<DatasetView> views;         // training input
    std::vector<Image> ground_truth_depth;  // clean depth per training view
    std::vector<DatasetView> test_views;    // held out; depth is clean
};

/// Full synthetic dataset in memory.
Dataset synthesize(const SyntheticSpec &spec);

inline constexpr int kDatasetFormatVersion = 1;

/// Writes images (PPM), depths (PFM), cameras (JSON), ground truth under a `gt_`
/// prefix, `dataset.json` and the resolved spec to `dir`.
void write_dataset(const Dataset &data, const SyntheticSpec &spec, const std::filesystem::path &dir);

/// Reads the dataset written by write_dataset. Ground truth is only loaded when requested.
Dataset load_dataset(const std::filesystem::path &dir, bool with_ground_truth);

} // namespace dofsplat
