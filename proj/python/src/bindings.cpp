// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Python bindings. Images cross the boundary as float64 NumPy arrays of shape
// (H, W) for single-channel maps and (H, W, C) otherwise.
#include "dofsplat/error.hpp"
#include "dofsplat/gradcheck.hpp"
#include "dofsplat/io.hpp"
#include "dofsplat/losses.hpp"
#include "dofsplat/metrics.hpp"
#include "dofsplat/pipeline.hpp"
#include "dofsplat/rasterizer.hpp"
#include "dofsplat/synthetic.hpp"
#include "dofsplat/training.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstring>

namespace py = pybind11;
using namespace dofsplat;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image
to_image(const Array &a) {
    if (a.ndim() != 2 && a.ndim() != 3) {
        throw py::value_error("expected an array of shape (H, W) or (H, W, C)");
    }
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    Image img(w, h, c);
    std::copy_n(a.data(), img.data.size(), img.data.begin());
    return img;
}

Array
to_array(const Image &img) {
    std::vector<py::ssize_t> shape = {img.height, img.width};
    if (img.channels != 1) shape.push_back(img.channels);
    Array out(shape);
    std::copy(img.data.begin(), img.data.end(), out.mutable_data());
    return out;
}

std::vector<Image>
to_images(const std::vector<Array> &arrays) {
    std::vector<Image> out;
    out.reserve(arrays.size());
    for (const Array &a : arrays) out.push_back(to_image(a));
    return out;
}

py::object
to_python(const nlohmann::json &j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json
from_python(const py::object &o) {
    const std::string s = py::module_::import("json").attr("dumps")(o).cast<std::string>();
    return nlohmann::json::parse(s);
}

DepthMode
depth_mode(const std::string &s) {
    if (s == "normalized") return DepthMode::Normalized;
    if (s == "accumulated") return DepthMode::Accumulated;
    throw py::value_error("depth_mode must be 'normalized' or 'accumulated'");
}

py::dict
view_dict(const DatasetView &v) {
    py::dict d;
    d["name"] = v.name;
    d["camera"] = v.camera;
    d["image"] = to_array(v.image);
    d["depth"] = to_array(v.depth);
    return d;
}

py::dict
loss_dict(const LossBreakdown &l) {
    py::dict d;
    d["l1"] = l.l1;
    d["dssim"] = l.dssim;
    d["visibility"] = l.visibility;
    d["vis_weight"] = l.vis_weight_used;
    d["masked_pixels"] = l.masked_pixel_count;
    d["total"] = l.total;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Depth-anchored Gaussian splatting core";

    auto format_error = py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<UnsupportedVersionError>(m, "UnsupportedVersionError", format_error.ptr());

    // ---- geometry
    py::class_<Camera>(m, "Camera")
        .def(py::init<>())
        .def_readwrite("fx", &Camera::fx)
        .def_readwrite("fy", &Camera::fy)
        .def_readwrite("cx", &Camera::cx)
        .def_readwrite("cy", &Camera::cy)
        .def_readwrite("width", &Camera::width)
        .def_readwrite("height", &Camera::height)
        .def_property(
            "cam_to_world", [](const Camera &c) { return c.cam_to_world.matrix(); },
            [](Camera &c, const Eigen::Matrix4d &mat) { c.cam_to_world = Pose::from_matrix(mat); },
            "4x4 camera-to-world matrix (x right, y down, z forward)")
        .def_property_readonly("center", &Camera::center)
        .def("validate", &Camera::validate)
        .def("to_json", [](const Camera &c) { return to_python(camera_to_json(c)); })
        .def_static("from_json", [](const py::object &o) { return camera_from_json(from_python(o)); })
        .def("__repr__", [](const Camera &c) {
            return "Camera(" + std::to_string(c.width) + "x" + std::to_string(c.height) + ", fx=" +
                   std::to_string(c.fx) + ")";
        });

    m.def(
        "unproject", [](double u, double v, double depth, const Camera &c) { return unproject({u, v}, depth, c); },
        py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("camera"));
    m.def(
        "project",
        [](const Eigen::Vector3d &x, const Camera &c) {
            const Projection p = project(x, c);
            return py::make_tuple(p.pixel.u, p.pixel.v, p.depth);
        },
        py::arg("point"), py::arg("camera"), "Returns (u, v, depth).");
    m.def(
        "frustum_contains",
        [](int i, int j, const Eigen::Vector3d &x, const Camera &c) { return frustum_contains({i, j}, x, c); },
        py::arg("i"), py::arg("j"), py::arg("point"), py::arg("camera"));
    m.def("bounded_offset", &bounded_offset, py::arg("raw"));

    // ---- synthetic data
    py::class_<SyntheticSpec>(m, "SyntheticSpec")
        .def(py::init([](const std::string &kind) { return SyntheticSpec::defaults(parse_scene_kind(kind)); }),
             py::arg("kind") = "two_planes")
        .def_property(
            "kind", [](const SyntheticSpec &s) { return std::string(scene_kind_name(s.kind)); },
            [](SyntheticSpec &s, const std::string &k) { s.kind = parse_scene_kind(k); })
        .def_property(
            "texture", [](const SyntheticSpec &s) { return std::string(texture_kind_name(s.texture)); },
            [](SyntheticSpec &s, const std::string &k) { s.texture = parse_texture_kind(k); })
        .def_readwrite("texture_frequency", &SyntheticSpec::texture_frequency)
        .def_readwrite("views", &SyntheticSpec::views)
        .def_readwrite("width", &SyntheticSpec::width)
        .def_readwrite("height", &SyntheticSpec::height)
        .def_readwrite("fov_deg", &SyntheticSpec::fov_deg)
        .def_readwrite("seed", &SyntheticSpec::seed)
        .def_readwrite("noise_sigma", &SyntheticSpec::noise_sigma)
        .def_readwrite("bump_amp", &SyntheticSpec::bump_amp)
        .def("validate", &SyntheticSpec::validate);

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("views",
                               [](const Dataset &d) {
                                   py::list out;
                                   for (const auto &v : d.views) out.append(view_dict(v));
                                   return out;
                               })
        .def_property_readonly("test_views",
                               [](const Dataset &d) {
                                   py::list out;
                                   for (const auto &v : d.test_views) out.append(view_dict(v));
                                   return out;
                               })
        .def_property_readonly("ground_truth_depth",
                               [](const Dataset &d) {
                                   py::list out;
                                   for (const auto &g : d.ground_truth_depth) out.append(to_array(g));
                                   return out;
                               })
        .def("__len__", [](const Dataset &d) { return d.views.size(); });

    m.def("synthesize", &synthesize, py::arg("spec"));
    m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("spec"), py::arg("directory"));
    m.def("load_dataset", &load_dataset, py::arg("directory"), py::arg("with_ground_truth") = true);

    // ---- scene
    py::class_<Scene>(m, "Scene")
        .def_property_readonly("gaussian_count", &Scene::gaussian_count)
        .def_property_readonly("view_count", [](const Scene &s) { return s.views.size(); })
        .def(
            "camera", [](const Scene &s, std::size_t v) { return s.views.at(v).camera; }, py::arg("view"))
        .def(
            "offsets",
            [](const Scene &s, std::size_t v) {
                const ViewParameters &p = s.views.at(v).params;
                Array out({static_cast<py::ssize_t>(p.grid_height), static_cast<py::ssize_t>(p.grid_width),
                           py::ssize_t{2}});
                double *dst = out.mutable_data();
                for (std::size_t k = 0; k < p.count(); ++k) {
                    const Eigen::Vector2d d = bounded_offset({p.raw_offset[2 * k], p.raw_offset[2 * k + 1]});
                    dst[2 * k] = d.x();
                    dst[2 * k + 1] = d.y();
                }
                return out;
            },
            py::arg("view"), "Bounded sub-pixel offsets of a view, shape (rows, cols, 2).")
        .def(
            "depth_map",
            [](const Scene &s, std::size_t v) {
                const SceneView &sv = s.views.at(v);
                return to_array(gaussian_depth_map(sv.params, sv.camera));
            },
            py::arg("view"), "Per-view learnable depth on the anchor grid.");

    m.def("initial_scene", &initial_scene, py::arg("dataset"), py::arg("stride") = 1);
    m.def(
        "training_targets",
        [](const Dataset &d) {
            py::list out;
            for (const Image &t : training_targets(d)) out.append(to_array(t));
            return out;
        },
        py::arg("dataset"));

    m.def(
        "render",
        [](const Scene &s, const Camera &cam, int sh_degree, const std::string &mode) {
            const auto gaussians = materialize_scene(s);
            const RenderOutput r = render(gaussians, cam, {sh_degree, depth_mode(mode)});
            py::dict d;
            d["color"] = to_array(r.color);
            d["depth"] = to_array(r.depth);
            d["alpha"] = to_array(r.alpha);
            return d;
        },
        py::arg("scene"), py::arg("camera"), py::arg("sh_degree") = kMaxShDegree,
        py::arg("depth_mode") = "normalized", "Returns a dict with color (H,W,3), depth (H,W) and alpha (H,W).");

    // ---- training
    m.def(
        "default_train_config", [] { return to_python(train_config_to_json(TrainConfig{})); },
        "The default training configuration as a dict.");
    m.def(
        "train",
        [](const Scene &scene, const std::vector<Array> &targets, const py::object &config) {
            const TrainConfig cfg =
                config.is_none() ? TrainConfig{} : train_config_from_json(from_python(config), TrainConfig{});
            const std::vector<Image> imgs = to_images(targets);
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(scene, imgs, cfg);
            }
            py::list history;
            for (const LossBreakdown &l : r.history) history.append(loss_dict(l));
            return py::make_tuple(std::move(r.scene), history);
        },
        py::arg("scene"), py::arg("targets"), py::arg("config") = py::none(),
        "Optimizes the scene. `config` is a dict of training options; unknown keys are rejected. "
        "Returns (scene, loss_history).");

    m.def(
        "evaluate",
        [](const Scene &s, const Dataset &d, int patch) { return to_python(eval_report_to_json(evaluate_scene(s, d, patch))); },
        py::arg("scene"), py::arg("dataset"), py::arg("patch") = kDefaultPatchSize);

    m.def(
        "align",
        [](const Scene &s, const Array &image, const Camera &init, int iterations) {
            AlignConfig cfg;
            cfg.iterations = iterations;
            const auto gaussians = materialize_scene(s);
            const Image target = to_image(image);
            AlignResult r;
            {
                py::gil_scoped_release release;
                r = align_test_view(gaussians, target, init, cfg);
            }
            return py::make_tuple(r.camera, r.initial_loss, r.best_loss);
        },
        py::arg("scene"), py::arg("image"), py::arg("init"), py::arg("iterations") = 500,
        "Refines the camera pose against a photo. Returns (camera, initial_loss, best_loss).");

    m.def(
        "gradcheck",
        [](std::uint64_t seed, int size, int gaussians, double tol, std::size_t max_entries, bool free_position) {
            GradcheckConfig cfg;
            cfg.seed = seed;
            cfg.size = size;
            cfg.gaussians = gaussians;
            cfg.tolerance = tol;
            cfg.max_entries_per_class = max_entries;
            cfg.free_position = free_position;
            GradcheckReport r;
            {
                py::gil_scoped_release release;
                r = run_gradcheck(cfg);
            }
            py::dict by_class;
            for (ParamClass pc : kAllParamClasses) {
                const auto c = static_cast<std::size_t>(pc);
                if (r.checked_by_class[c] > 0) by_class[param_class_name(pc)] = r.max_rel_error_by_class[c];
            }
            py::dict d;
            d["max_rel_error"] = r.max_rel_error;
            d["checked"] = r.checked;
            d["nonsmooth"] = r.nonsmooth;
            d["by_class"] = by_class;
            d["passed"] = r.passed;
            return d;
        },
        py::arg("seed") = 0, py::arg("size") = 16, py::arg("gaussians") = 20, py::arg("tol") = 1e-5,
        py::arg("max_entries") = 0, py::arg("free_position") = false);

    // ---- metrics and schedules
    m.def(
        "pdc",
        [](const Array &pred, const Array &ref, int patch) {
            const PdcResult r = pdc(to_image(pred), to_image(ref), patch);
            Array grid({static_cast<py::ssize_t>(r.patches_y), static_cast<py::ssize_t>(r.patches_x)});
            std::copy(r.per_patch.begin(), r.per_patch.end(), grid.mutable_data());
            return py::make_tuple(r.mean, grid);
        },
        py::arg("pred_depth"), py::arg("ref_depth"), py::arg("patch") = kDefaultPatchSize,
        "Patch-wise depth correlation. Returns (mean, per_patch grid).");
    m.def(
        "psnr", [](const Array &a, const Array &b) { return psnr(to_image(a), to_image(b)); }, py::arg("a"),
        py::arg("b"));
    m.def(
        "ssim", [](const Array &a, const Array &b) { return ssim(to_image(a), to_image(b)).value; }, py::arg("a"),
        py::arg("b"));
    m.def("vis_weight", &vis_weight, py::arg("iteration"), py::arg("total"), py::arg("lambda0") = 1.0);
    m.def("sh_degree_at", &sh_degree_at, py::arg("iteration"), py::arg("step") = 100);
    m.def(
        "render_resolution_at",
        [](long t, int w, int h) {
            const auto r = render_resolution_at(t, w, h);
            return py::make_tuple(r[0], r[1]);
        },
        py::arg("iteration"), py::arg("width"), py::arg("height"));

    // ---- file formats
    m.def(
        "read_pfm", [](const std::filesystem::path &p) { return to_array(read_pfm(p)); }, py::arg("path"));
    m.def(
        "write_pfm", [](const std::filesystem::path &p, const Array &a) { write_pfm(p, to_image(a)); },
        py::arg("path"), py::arg("depth"));
    m.def(
        "read_ppm", [](const std::filesystem::path &p) { return to_array(read_ppm(p)); }, py::arg("path"));
    m.def(
        "write_ppm", [](const std::filesystem::path &p, const Array &a) { write_ppm(p, to_image(a)); },
        py::arg("path"), py::arg("rgb"));
    m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("scene"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def(
        "encode_checkpoint",
        [](const Scene &s) {
            const Bytes b = encode_checkpoint(s);
            return py::bytes(reinterpret_cast<const char *>(b.data()), b.size());
        },
        py::arg("scene"));
    m.def(
        "decode_checkpoint",
        [](const py::bytes &raw) {
            const std::string s = raw;
            return decode_checkpoint(Bytes(s.begin(), s.end()));
        },
        py::arg("data"));
    m.def("read_camera", &read_camera, py::arg("path"));
    m.def("write_camera", &write_camera, py::arg("path"), py::arg("camera"));
}
