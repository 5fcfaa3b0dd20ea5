// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/error.hpp"
#include "dofsplat/gradcheck.hpp"
#include "dofsplat/pipeline.hpp"
#include "dofsplat/training.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace dofsplat;

namespace {

Dataset
small_dataset(std::uint64_t seed, double noise = 0.02) {
    SyntheticSpec s = SyntheticSpec::defaults(SceneKind::TwoPlanes);
    s.views = 2;
    s.width = s.height = 16;
    s.seed = seed;
    s.noise_sigma = noise;
    s.bump_amp = noise;
    return synthesize(s);
}

TrainConfig
short_config(long iters) {
    TrainConfig c;
    c.iterations = iters;
    return c;
}

} // namespace

TEST_CASE("adam first step and zero gradients") {
    std::vector<double> p = {0.0};
    const std::vector<double> g = {1.0};
    AdamState s(1);
    adam_step(p, g, s, 0.1);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(s.step == 1);

    std::vector<double> q = {0.5, -0.25};
    AdamState z(2);
    z.m = {0.2, 0.1};
    z.v = {0.04, 0.01};
    z.step = 3;
    const std::vector<double> zero = {0.0, 0.0};
    const AdamState before = z;
    adam_step(q, zero, z, 0.1);
    CHECK(z.m[0] == doctest::Approx(0.9 * before.m[0]).epsilon(1e-15));
    CHECK(z.v[1] == doctest::Approx(0.999 * before.v[1]).epsilon(1e-15));

    std::vector<double> bad = {1.0, 2.0};
    AdamState s1(1);
    CHECK_THROWS_AS(adam_step(bad, g, s1, 0.1), ContractError);
}

TEST_CASE("adam is deterministic") {
    auto run = [] {
        std::vector<double> p = {1.0, -2.0, 0.5};
        AdamState s(3);
        for (int t = 0; t < 50; ++t) {
            const std::vector<double> g = {std::sin(t + p[0]), p[1] * 0.1, std::cos(p[2])};
            adam_step(p, g, s, 0.01);
        }
        return std::make_pair(p, s.m);
    };
    CHECK(run() == run());
}

TEST_CASE("zero iterations return the scene unchanged") {
    const Dataset d = small_dataset(1);
    const Scene s0 = initial_scene(d);
    const TrainResult r = train(s0, training_targets(d), short_config(0));
    CHECK(r.history.empty());
    for (std::size_t v = 0; v < s0.views.size(); ++v) {
        CHECK(r.scene.views[v].params == s0.views[v].params);
    }
}

TEST_CASE("ablation switches") {
    const Dataset d = small_dataset(2);
    const Scene s0 = initial_scene(d);
    TrainConfig c = short_config(12);
    c.disable_vis_loss = true;
    const TrainResult nv = train(s0, training_targets(d), c);
    REQUIRE(nv.history.size() == 12);
    for (const LossBreakdown &l : nv.history) {
        CHECK(l.vis_weight_used == 0.0);
    }

    c = short_config(12);
    c.freeze_offsets = true;
    std::vector<std::vector<double>> seen;
    const TrainResult fr = train(s0, training_targets(d), c);
    for (std::size_t v = 0; v < s0.views.size(); ++v) {
        CHECK(fr.scene.views[v].params.raw_offset == s0.views[v].params.raw_offset);
        CHECK(fr.scene.views[v].params.log_depth != s0.views[v].params.log_depth);
    }

    c = short_config(12);
    c.naive_free_position = true;
    const TrainResult nav = train(s0, training_targets(d), c);
    CHECK(nav.scene.views[0].params.free_position());
    for (const LossBreakdown &l : nav.history) {
        CHECK(l.vis_weight_used == 0.0);
    }
}

TEST_CASE("training is bitwise reproducible and keeps offsets bounded") {
    const Dataset d = small_dataset(3);
    const Scene s0 = initial_scene(d);
    const TrainResult a = train(s0, training_targets(d), short_config(20));
    const TrainResult b = train(s0, training_targets(d), short_config(20));
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].total == b.history[i].total);
    }
    for (std::size_t v = 0; v < a.scene.views.size(); ++v) {
        CHECK(a.scene.views[v].params == b.scene.views[v].params);
        for (const MaterializedGaussian &g : materialize_view(a.scene.views[v].params, a.scene.views[v].camera)) {
            CHECK(frustum_contains(g.source.pixel, g.mean, a.scene.views[v].camera));
        }
    }
    // The visibility weight follows the linear schedule.
    CHECK(a.history[0].vis_weight_used == 1.0);
    CHECK(a.history[10].vis_weight_used == doctest::Approx(0.5).epsilon(1e-15));
    // Training makes progress on the photometric term.
    CHECK(a.history.back().l1 < a.history.front().l1);
}

TEST_CASE("scale clipping") {
    const Camera cam = testutil::simple_camera(9, 9, 50.0); // pixel (4,4) lies on the principal ray
    Scene s;
    s.views.push_back({cam, initialize_view(cam, Image(9, 9, 3, 0.5), Image(9, 9, 1, 2.0))});
    const std::size_t k = 4 * 9 + 4;
    auto &ls = s.views[0].params.log_scale;
    // 3·f·s/z = 10 px: untouched.
    const double s10 = 10.0 * 2.0 / (3.0 * 50.0);
    std::fill(ls.begin() + 3 * k, ls.begin() + 3 * k + 3, std::log(s10));
    Scene before = s;
    const std::vector<Camera> cams = {cam};
    scale_clip(s, cams, 30.0);
    CHECK(s.views[0].params.log_scale[3 * k] == before.views[0].params.log_scale[3 * k]);

    // 60 px: reduced by ln 2.
    const double s60 = 60.0 * 2.0 / (3.0 * 50.0);
    std::fill(ls.begin() + 3 * k, ls.begin() + 3 * k + 3, std::log(s60));
    CHECK(scale_clip(s, cams, 30.0) == 1);
    CHECK(ls[3 * k] == doctest::Approx(std::log(s60) - std::log(2.0)).epsilon(1e-12));
    const double r = max_screen_radius(materialize_view(s.views[0].params, cam)[k], cams);
    CHECK(r == doctest::Approx(30.0).epsilon(1e-12));

    // Idempotent.
    before = s;
    CHECK(scale_clip(s, cams, 30.0) == 0);
    CHECK(s.views[0].params == before.views[0].params);
    CHECK_THROWS_AS(scale_clip(s, cams, 0.0), ContractError);
}

TEST_CASE("alignment corner cases") {
    const Dataset d = small_dataset(4, 0.0);
    const Scene s = initial_scene(d);
    const auto gaussians = materialize_scene(s);
    const Camera &truth = d.views[0].camera;

    AlignConfig none;
    none.iterations = 0;
    const AlignResult z = align_test_view(gaussians, d.views[0].image, truth, none);
    CHECK(z.camera.cam_to_world.matrix() == truth.cam_to_world.matrix());

    // Against its own render the true pose is the exact optimum, so it must not drift.
    const Image target = render(gaussians, truth).color;
    AlignConfig few;
    few.iterations = 30;
    const AlignResult a = align_test_view(gaussians, target, truth, few);
    CHECK(a.best_loss <= a.initial_loss);
    const Eigen::Matrix3d dr = truth.cam_to_world.rotation.transpose() * a.camera.cam_to_world.rotation;
    CHECK(so3_log(dr).norm() < 1e-3);
    CHECK((a.camera.center() - truth.center()).norm() < 1e-3);

    // Intrinsics are never touched.
    CHECK(a.camera.fx == truth.fx);
    CHECK(a.camera.cx == truth.cx);
    CHECK_THROWS_AS(align_test_view(gaussians, Image(3, 3, 3), truth, few), ContractError);
}

TEST_CASE("pose increment composes on the right") {
    std::mt19937_64 rng(1);
    const Camera c = testutil::random_camera(rng);
    const Eigen::Vector3d w(0.01, -0.02, 0.03), t(0.1, 0.2, -0.3);
    const Camera p = apply_pose_increment(c, w, t);
    CHECK((p.cam_to_world.rotation - c.cam_to_world.rotation * so3_exp(w)).norm() <= 1e-15);
    CHECK((p.center() - (c.center() + c.cam_to_world.rotation * t)).norm() <= 1e-14);
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.iterations = -1;
    CHECK_THROWS_AS(c.validate(), ContractError);
    c = TrainConfig{};
    c.lr.sh = -1.0;
    CHECK_THROWS_AS(c.validate(), ContractError);
    c = TrainConfig{};
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("free-position gradients match finite differences") {
    GradcheckConfig cfg;
    cfg.seed = 3;
    cfg.size = 12;
    cfg.gaussians = 12;
    cfg.free_position = true;
    const GradcheckReport r = run_gradcheck(cfg);
    CHECK(r.passed);
    CHECK(r.max_rel_error <= 1e-5);
    CHECK(r.checked_by_class[static_cast<std::size_t>(ParamClass::FreeMean)] > 0);
}
