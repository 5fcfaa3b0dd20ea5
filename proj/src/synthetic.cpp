// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/synthetic.hpp"

#include "dofsplat/error.hpp"
#include "dofsplat/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

namespace dofsplat {

namespace fs = std::filesystem;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::uint64_t
splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double
lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
    const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x632be59bd9b4e019ULL ^
                                                         static_cast<std::uint64_t>(iy)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double
smoothstep(double t) {
    return t * t * (3.0 - 2.0 * t);
}

// Surface tints: texture value 0 maps to `dark`, 1 to `light`.
struct Tint {
    Eigen::Vector3d dark;
    Eigen::Vector3d light;
};

const Tint kTints[] = {
    {{0.20, 0.12, 0.08}, {0.95, 0.70, 0.45}}, // warm
    {{0.10, 0.18, 0.25}, {0.55, 0.80, 0.95}}, // cool
    {{0.12, 0.22, 0.10}, {0.70, 0.92, 0.55}}, // green
    {{0.25, 0.10, 0.20}, {0.95, 0.60, 0.85}}, // pink
    {{0.20, 0.20, 0.20}, {0.90, 0.90, 0.85}}, // neutral
    {{0.22, 0.18, 0.05}, {0.95, 0.90, 0.40}}, // yellow
};

struct Candidate {
    double t = std::numeric_limits<double>::infinity();
    double a = 0.0, b = 0.0; // surface coordinates
    int tint = 0;
};

void
plane_hit(const Eigen::Vector3d &o, const Eigen::Vector3d &d, int axis, double offset, int coord_a, int coord_b,
          int tint, Candidate &best) {
    if (d[axis] == 0.0) {
        return;
    }
    const double t = (offset - o[axis]) / d[axis];
    if (t > 0.0 && t < best.t) {
        const Eigen::Vector3d p = o + t * d;
        best = {t, p[coord_a], p[coord_b], tint};
    }
}

void
sphere_hit(const Eigen::Vector3d &o, const Eigen::Vector3d &d, const Eigen::Vector3d &c, double r, int tint,
           Candidate &best) {
    const Eigen::Vector3d oc = o - c;
    const double a = d.squaredNorm();
    const double b = oc.dot(d);
    const double disc = b * b - a * (oc.squaredNorm() - r * r);
    if (disc < 0.0) {
        return;
    }
    const double s = std::sqrt(disc);
    double t = (-b - s) / a;
    if (t <= 0.0) {
        t = (-b + s) / a;
    }
    if (t > 0.0 && t < best.t) {
        const Eigen::Vector3d n = (o + t * d - c) / r;
        best = {t, r * std::atan2(n.x(), -n.z()), r * std::acos(std::clamp(n.y(), -1.0, 1.0)), tint};
    }
}

// Interior of an axis-aligned box: the ray exits through exactly one face.
void
box_interior_hit(const Eigen::Vector3d &o, const Eigen::Vector3d &d, const Eigen::Vector3d &lo,
                 const Eigen::Vector3d &hi, Candidate &best) {
    for (int axis = 0; axis < 3; ++axis) {
        if (d[axis] == 0.0) {
            continue;
        }
        const bool positive = d[axis] > 0.0;
        const double bound = positive ? hi[axis] : lo[axis];
        const double t = (bound - o[axis]) / d[axis];
        if (t > 0.0 && t < best.t) {
            const Eigen::Vector3d p = o + t * d;
            const int ca = (axis + 1) % 3, cb = (axis + 2) % 3;
            best = {t, p[ca], p[cb], 2 * axis + (positive ? 1 : 0)};
        }
    }
}

} // namespace

SceneKind
parse_scene_kind(const std::string &name) {
    if (name == "two_planes") return SceneKind::TwoPlanes;
    if (name == "sphere_on_plane") return SceneKind::SphereOnPlane;
    if (name == "box_room") return SceneKind::BoxRoom;
    throw SpecError("unknown scene kind '" + name + "' (expected two_planes, sphere_on_plane or box_room)");
}

TextureKind
parse_texture_kind(const std::string &name) {
    if (name == "checker") return TextureKind::Checker;
    if (name == "stripes") return TextureKind::Stripes;
    if (name == "noise") return TextureKind::Noise;
    throw SpecError("unknown texture '" + name + "' (expected checker, stripes or noise)");
}

const char *
scene_kind_name(SceneKind kind) {
    switch (kind) {
    case SceneKind::TwoPlanes: return "two_planes";
    case SceneKind::SphereOnPlane: return "sphere_on_plane";
    case SceneKind::BoxRoom: return "box_room";
    }
    return "?";
}

const char *
texture_kind_name(TextureKind kind) {
    switch (kind) {
    case TextureKind::Checker: return "checker";
    case TextureKind::Stripes: return "stripes";
    case TextureKind::Noise: return "noise";
    }
    return "?";
}

SyntheticSpec
SyntheticSpec::defaults(SceneKind kind) {
    SyntheticSpec s;
    s.kind = kind;
    switch (kind) {
    case SceneKind::TwoPlanes:
        break;
    case SceneKind::SphereOnPlane:
        s.target = {0.0, -0.4, 0.0};
        s.elevation_deg = 15.0;
        break;
    case SceneKind::BoxRoom:
        s.target = {0.0, -0.3, 0.0};
        s.ring_radius = 1.5;
        s.arc_deg = 60.0;
        s.elevation_deg = 5.0;
        break;
    }
    return s;
}

void
SyntheticSpec::validate() const {
    if (views < 2) {
        throw SpecError("synthetic spec needs at least 2 views, got " + std::to_string(views));
    }
    if (width < 16 || height < 16) {
        throw SpecError("synthetic images must be at least 16x16, got " + std::to_string(width) + "x" +
                        std::to_string(height));
    }
    if (!(noise_sigma >= 0.0) || !(bump_amp >= 0.0)) {
        throw SpecError("depth perturbation magnitudes must be non-negative");
    }
    if (!(texture_frequency > 0.0) || !(fov_deg > 0.0 && fov_deg < 170.0) || !(ring_radius > 0.0) ||
        !(arc_deg >= 0.0 && arc_deg < 360.0) || !(std::abs(elevation_deg) < 89.0) || !target.allFinite()) {
        throw SpecError("degenerate camera placement or texture parameters");
    }
}

double
texture_value(const SyntheticSpec &spec, double a, double b) {
    const double f = spec.texture_frequency;
    switch (spec.texture) {
    case TextureKind::Checker: {
        const auto parity = (static_cast<long long>(std::floor(f * a)) + static_cast<long long>(std::floor(f * b))) & 1;
        return parity ? 1.0 : 0.0;
    }
    case TextureKind::Stripes:
        return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * f * a);
    case TextureKind::Noise: {
        const double x = f * a, y = f * b;
        const double fx = std::floor(x), fy = std::floor(y);
        const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
        const double tx = smoothstep(x - fx), ty = smoothstep(y - fy);
        const double v00 = lattice_value(ix, iy, spec.seed), v10 = lattice_value(ix + 1, iy, spec.seed);
        const double v01 = lattice_value(ix, iy + 1, spec.seed), v11 = lattice_value(ix + 1, iy + 1, spec.seed);
        return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
    }
    }
    return 0.0;
}

std::optional<SurfaceHit>
cast_ray(const SyntheticSpec &spec, const Eigen::Vector3d &origin, const Eigen::Vector3d &dir) {
    Candidate best;
    switch (spec.kind) {
    case SceneKind::TwoPlanes:
        plane_hit(origin, dir, 2, 0.0, 0, 1, 0, best);  // wall z = 0
        plane_hit(origin, dir, 1, -1.0, 0, 2, 1, best); // floor y = −1
        break;
    case SceneKind::SphereOnPlane:
        plane_hit(origin, dir, 1, -1.0, 0, 2, 1, best);
        plane_hit(origin, dir, 2, 2.0, 0, 1, 4, best);
        sphere_hit(origin, dir, {0.0, -0.4, 0.0}, 0.6, 0, best);
        break;
    case SceneKind::BoxRoom:
        box_interior_hit(origin, dir, {-3.0, -1.5, -3.0}, {3.0, 1.5, 3.0}, best);
        break;
    }
    if (!std::isfinite(best.t)) {
        return std::nullopt;
    }
    SurfaceHit hit;
    hit.t = best.t;
    hit.point = origin + best.t * dir;
    hit.texture = texture_value(spec, best.a, best.b);
    const Tint &tint = kTints[best.tint % std::size(kTints)];
    hit.color = tint.dark + hit.texture * (tint.light - tint.dark);
    return hit;
}

Camera
ring_camera(const SyntheticSpec &spec, double azimuth_deg) {
    const double th = azimuth_deg * kDegToRad, ph = spec.elevation_deg * kDegToRad;
    const Eigen::Vector3d eye =
        spec.target + spec.ring_radius * Eigen::Vector3d(std::sin(th) * std::cos(ph), std::sin(ph),
                                                         -std::cos(th) * std::cos(ph));
    Camera cam;
    cam.width = spec.width;
    cam.height = spec.height;
    cam.fx = cam.fy = 0.5 * spec.width / std::tan(0.5 * spec.fov_deg * kDegToRad);
    cam.cx = 0.5 * spec.width;
    cam.cy = 0.5 * spec.height;
    try {
        cam.cam_to_world = Pose{look_at_rotation(eye, spec.target, {0.0, 1.0, 0.0}), eye};
    } catch (const ContractError &e) {
        throw SpecError(std::string("degenerate camera placement: ") + e.what());
    }
    // The target must lie in front of the camera and inside its image.
    const Eigen::Vector3d tc = cam.to_camera(spec.target);
    if (!(tc.z() > kMinCameraDepth)) {
        throw SpecError("degenerate camera placement: target is behind the camera");
    }
    return cam;
}

namespace {

std::vector<double>
ring_azimuths(const SyntheticSpec &spec) {
    std::vector<double> az(static_cast<std::size_t>(spec.views));
    for (int k = 0; k < spec.views; ++k) {
        az[k] = -0.5 * spec.arc_deg + spec.arc_deg * k / (spec.views - 1);
    }
    return az;
}

} // namespace

std::vector<Camera>
training_cameras(const SyntheticSpec &spec) {
    spec.validate();
    std::vector<Camera> cams;
    for (double az : ring_azimuths(spec)) {
        cams.push_back(ring_camera(spec, az));
    }
    return cams;
}

std::vector<Camera>
test_cameras(const SyntheticSpec &spec) {
    spec.validate();
    const auto az = ring_azimuths(spec);
    std::vector<Camera> cams;
    for (std::size_t k = 0; k + 1 < az.size(); ++k) {
        cams.push_back(ring_camera(spec, 0.5 * (az[k] + az[k + 1])));
    }
    return cams;
}

RenderedView
ray_cast_view(const SyntheticSpec &spec, const Camera &cam) {
    RenderedView out;
    out.camera = cam;
    out.color = Image(cam.width, cam.height, 3);
    out.depth = Image(cam.width, cam.height, 1);
    out.texture = Image(cam.width, cam.height, 1);
    const Eigen::Matrix3d &r = cam.cam_to_world.rotation;
    const Eigen::Vector3d o = cam.center();
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const PixelCoord p = pixel_center({x, y});
            // Unit-z camera ray, so the hit parameter is the camera-space depth.
            const Eigen::Vector3d dir = r * Eigen::Vector3d((p.u - cam.cx) / cam.fx, (p.v - cam.cy) / cam.fy, 1.0);
            const auto hit = cast_ray(spec, o, dir);
            if (!hit) {
                throw SpecError("ray through pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                                ") misses the scene");
            }
            out.depth.at(x, y) = hit->t;
            out.texture.at(x, y) = hit->texture;
            for (int c = 0; c < 3; ++c) {
                out.color.at(x, y, c) = hit->color[c];
            }
        }
    }
    return out;
}

Image
perturb_depth(const Image &depth, const Image &texture, double sigma, double bump_amp, std::uint64_t seed) {
    if (!depth.same_shape(texture) || depth.channels != 1) {
        throw ContractError("perturb_depth: depth and texture must be matching single-channel images");
    }
    if (sigma < 0.0 || bump_amp < 0.0) {
        throw ContractError("perturb_depth: magnitudes must be non-negative");
    }
    if (sigma == 0.0 && bump_amp == 0.0) {
        return depth;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Image out = depth;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double n = normal(rng);
        const double factor = 1.0 + sigma * n + bump_amp * (2.0 * texture.data[i] - 1.0);
        out.data[i] = depth.data[i] * std::max(factor, 0.5);
    }
    return out;
}

Dataset
synthesize(const SyntheticSpec &spec) {
    spec.validate();
    Dataset data;
    const auto train = training_cameras(spec);
    for (std::size_t k = 0; k < train.size(); ++k) {
        RenderedView rv = ray_cast_view(spec, train[k]);
        DatasetView v;
        char name[32];
        std::snprintf(name, sizeof(name), "view_%03zu", k);
        v.name = name;
        v.camera = rv.camera;
        v.image = rv.color;
        v.depth = perturb_depth(rv.depth, rv.texture, spec.noise_sigma, spec.bump_amp, splitmix64(spec.seed + k));
        data.ground_truth_depth.push_back(std::move(rv.depth));
        data.views.push_back(std::move(v));
    }
    const auto test = test_cameras(spec);
    for (std::size_t k = 0; k < test.size(); ++k) {
        RenderedView rv = ray_cast_view(spec, test[k]);
        char name[32];
        std::snprintf(name, sizeof(name), "test_%03zu", k);
        data.test_views.push_back({name, rv.camera, std::move(rv.color), std::move(rv.depth)});
    }
    return data;
}

namespace {

nlohmann::json
spec_to_json(const SyntheticSpec &s) {
    return {{"kind", scene_kind_name(s.kind)},
            {"texture", texture_kind_name(s.texture)},
            {"texture_frequency", s.texture_frequency},
            {"views", s.views},
            {"width", s.width},
            {"height", s.height},
            {"fov_deg", s.fov_deg},
            {"ring_radius", s.ring_radius},
            {"arc_deg", s.arc_deg},
            {"elevation_deg", s.elevation_deg},
            {"target", {s.target.x(), s.target.y(), s.target.z()}},
            {"seed", s.seed},
            {"noise_sigma", s.noise_sigma},
            {"bump_amp", s.bump_amp}};
}

nlohmann::json
load_json(const fs::path &path) {
    const Bytes bytes = read_file(path);
    nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) {
        throw FormatError("'" + path.string() + "' is not valid JSON");
    }
    return j;
}

std::string
manifest_string(const nlohmann::json &entry, const char *key) {
    if (!entry.is_object() || !entry.contains(key) || !entry.at(key).is_string()) {
        throw FormatError(std::string("dataset.json: entry lacks string field '") + key + "'");
    }
    const std::string value = entry.at(key).get<std::string>();
    if (value.empty() || fs::path(value).is_absolute() || value.find("..") != std::string::npos) {
        throw FormatError("dataset.json: invalid relative path '" + value + "'");
    }
    return value;
}

DatasetView
load_view(const fs::path &dir, const nlohmann::json &entry, const char *depth_key) {
    DatasetView v;
    v.name = entry.value("name", std::string());
    v.camera = read_camera(dir / manifest_string(entry, "camera"));
    v.image = read_ppm(dir / manifest_string(entry, "image"));
    v.depth = read_pfm(dir / manifest_string(entry, depth_key));
    if (v.image.width != v.camera.width || v.image.height != v.camera.height ||
        v.depth.width != v.camera.width || v.depth.height != v.camera.height) {
        throw FormatError("dataset view '" + v.name + "': image, depth and camera sizes disagree");
    }
    return v;
}

} // namespace

void
write_dataset(const Dataset &data, const SyntheticSpec &spec, const fs::path &dir) {
    fs::create_directories(dir);
    nlohmann::json views = nlohmann::json::array();
    for (std::size_t k = 0; k < data.views.size(); ++k) {
        const DatasetView &v = data.views[k];
        const std::string image = v.name + ".ppm", depth = v.name + "_depth.pfm", camera = v.name + "_camera.json";
        write_ppm(dir / image, v.image);
        write_pfm(dir / depth, v.depth);
        write_camera(dir / camera, v.camera);
        views.push_back({{"name", v.name}, {"image", image}, {"depth", depth}, {"camera", camera}});
    }
    nlohmann::json gt_depths = nlohmann::json::array();
    for (std::size_t k = 0; k < data.ground_truth_depth.size(); ++k) {
        const std::string depth = "gt_" + data.views[k].name + "_depth.pfm";
        write_pfm(dir / depth, data.ground_truth_depth[k]);
        gt_depths.push_back(depth);
    }
    nlohmann::json tests = nlohmann::json::array();
    for (const DatasetView &v : data.test_views) {
        const std::string stem = "gt_" + v.name;
        write_ppm(dir / (stem + ".ppm"), v.image);
        write_pfm(dir / (stem + "_depth.pfm"), v.depth);
        write_camera(dir / (stem + "_camera.json"), v.camera);
        tests.push_back({{"name", v.name},
                         {"image", stem + ".ppm"},
                         {"depth", stem + "_depth.pfm"},
                         {"camera", stem + "_camera.json"}});
    }
    const nlohmann::json manifest = {{"format_version", kDatasetFormatVersion},
                                     {"views", views},
                                     {"ground_truth", {{"depths", gt_depths}, {"test_views", tests}}}};
    write_file_atomic(dir / "dataset.json", manifest.dump(2) + "\n");
    write_file_atomic(dir / "synth_config.json", spec_to_json(spec).dump(2) + "\n");
}

Dataset
load_dataset(const fs::path &dir, bool with_ground_truth) {
    const nlohmann::json m = load_json(dir / "dataset.json");
    if (!m.is_object() || !m.contains("format_version") || !m.at("format_version").is_number_integer()) {
        throw FormatError("dataset.json: missing format_version");
    }
    if (m.at("format_version").get<long long>() != kDatasetFormatVersion) {
        throw UnsupportedVersionError("dataset.json: unsupported format_version " + m.at("format_version").dump());
    }
    if (!m.contains("views") || !m.at("views").is_array() || m.at("views").size() < 1) {
        throw FormatError("dataset.json: 'views' must be a non-empty array");
    }
    Dataset data;
    for (const auto &entry : m.at("views")) {
        data.views.push_back(load_view(dir, entry, "depth"));
    }
    if (with_ground_truth) {
        const auto &gt = m.contains("ground_truth") ? m.at("ground_truth") : nlohmann::json();
        if (!gt.is_object() || !gt.contains("depths") || !gt.at("depths").is_array() ||
            gt.at("depths").size() != data.views.size()) {
            throw FormatError("dataset.json: ground truth depths missing or miscounted");
        }
        for (std::size_t k = 0; k < data.views.size(); ++k) {
            const auto &name = gt.at("depths")[k];
            if (!name.is_string()) {
                throw FormatError("dataset.json: ground truth depth entries must be strings");
            }
            Image d = read_pfm(dir / name.get<std::string>());
            if (d.width != data.views[k].camera.width || d.height != data.views[k].camera.height) {
                throw FormatError("dataset.json: ground truth depth size disagrees with its camera");
            }
            data.ground_truth_depth.push_back(std::move(d));
        }
        if (gt.contains("test_views")) {
            if (!gt.at("test_views").is_array()) {
                throw FormatError("dataset.json: 'test_views' must be an array");
            }
            for (const auto &entry : gt.at("test_views")) {
                data.test_views.push_back(load_view(dir, entry, "depth"));
            }
        }
    }
    return data;
}

} // namespace dofsplat
