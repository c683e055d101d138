/* SPDX-License-Identifier: Apache-2.0 */
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pointmode/checkpoint.hpp"
#include "pointmode/diagnostics.hpp"
#include "pointmode/pretrain.hpp"
#include "pointmode/rng.hpp"
#include "pointmode/scenegen.hpp"

using namespace pointmode;
using ad::Tensor;
using model::ModeModel;
using pretrain::PretrainConfig;

namespace {

model::SceneExpertConfig tiny_scene_cfg() {
    model::SceneExpertConfig c;
    c.patch_count = 8;
    c.patch_size = 8;
    c.feature_dim = 16;
    c.encoder_layers = 1;
    c.decoder_layers = 2;
    c.query_count = 3;
    c.heads = 2;
    return c;
}

model::ObjectExpertConfig tiny_object_cfg() {
    model::ObjectExpertConfig c;
    c.patch_count = 4;
    c.patch_size = 6;
    c.feature_dim = 16;
    c.encoder_layers = 1;
    c.decoder_layers = 1;
    c.heads = 2;
    c.mask_ratio = 0.5;
    return c;
}

PretrainConfig tiny_pretrain_cfg() {
    PretrainConfig cfg;
    cfg.block.block_count = 3;
    cfg.block.block_points = 16;
    cfg.opt.lr = 1e-3;
    cfg.opt.weight_decay = 0.01;
    cfg.seed = 5;
    return cfg;
}

geom::PointSet tiny_scene(std::uint64_t seed) {
    gen::SceneSpec spec;
    spec.scene_points = 160;
    spec.objects_min = 2;
    spec.objects_max = 3;
    return gen::gen_scene(spec, seed).points;
}

double grad_sq_for_prefix(const ModeModel& m, const std::string& prefix) {
    double sq = 0.0;
    for (const model::NamedParam& p : m.parameters()) {
        if (p.name.rfind(prefix, 0) == 0) {
            for (double g : p.tensor.grad()) sq += g * g;
        }
    }
    return sq;
}

}  // namespace

TEST_CASE("config validation") {
    PretrainConfig cfg = tiny_pretrain_cfg();
    cfg.toggles.scene_regression = false;
    cfg.toggles.object_reconstruction = false;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = tiny_pretrain_cfg();
    cfg.toggles.object_reconstruction = false;  // joint still on
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = tiny_pretrain_cfg();
    cfg.weights = {0.0, 0.0};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("giou_loss_mean values against the plain kernel") {
    // two predictions equal to their targets -> loss 0
    const std::vector<geom::Box3D> gts = {geom::make_box({0, 0, 0}, {1, 1, 1}),
                                          geom::make_box({3, 1, 0}, {0.5, 0.5, 0.5})};
    std::vector<double> centers = {0, 0, 0, 3, 1, 0};
    std::vector<double> halves = {1, 1, 1, 0.5, 0.5, 0.5};
    model::PredBoxes preds;
    preds.center = Tensor::from_values({2, 3}, centers);
    preds.half = Tensor::from_values({2, 3}, halves);
    preds.count = 2;
    const pretrain::Pairing pairing = {{0, 0}, {1, 1}};
    CHECK(pretrain::giou_loss_mean(preds, gts, pairing).scalar_value() == doctest::Approx(0.0).epsilon(1e-12));

    // hand-computed overlap case: giou = 1/3 -> loss = 2/3
    model::PredBoxes shifted;
    shifted.center = Tensor::from_values({1, 3}, {1, 0, 0});
    shifted.half = Tensor::from_values({1, 3}, {1, 1, 1});
    shifted.count = 1;
    const std::vector<geom::Box3D> one = {geom::make_box({0, 0, 0}, {1, 1, 1})};
    CHECK(pretrain::giou_loss_mean(shifted, one, {{0, 0}}).scalar_value() ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    // agrees with the double-precision kernel on random pairs
    Rng rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        const geom::Box3D g = geom::make_box({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)},
                                             {rng.uniform(0.1, 1), rng.uniform(0.1, 1), rng.uniform(0.1, 1)});
        const geom::Box3D p = geom::make_box({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)},
                                             {rng.uniform(0.1, 1), rng.uniform(0.1, 1), rng.uniform(0.1, 1)});
        model::PredBoxes pb;
        pb.center = Tensor::from_values({1, 3}, {p.center[0], p.center[1], p.center[2]});
        pb.half = Tensor::from_values({1, 3}, {p.half[0], p.half[1], p.half[2]});
        pb.count = 1;
        CHECK(pretrain::giou_loss_mean(pb, {g}, {{0, 0}}).scalar_value() ==
              doctest::Approx(1.0 - geom::giou(p, g)).epsilon(1e-12));
    }
}

TEST_CASE("loss decomposition holds to 1e-12 and weights scale linearly") {
    ModeModel m(tiny_scene_cfg(), tiny_object_cfg(), 4, 31);
    const geom::PointSet scene = tiny_scene(3);
    PretrainConfig cfg = tiny_pretrain_cfg();

    const auto fwd = pretrain::forward_scene_loss(m, scene, cfg, 77);
    CHECK(std::abs(fwd.total.scalar_value() -
                   (cfg.weights.lambda1 * fwd.cd.scalar_value() + cfg.weights.lambda2 * fwd.giou_loss.scalar_value())) <
          1e-12);

    // lambda1 = 0 -> total equals lambda2 * giou term exactly
    cfg.weights = {0.0, 0.7};
    const auto fwd0 = pretrain::forward_scene_loss(m, scene, cfg, 77);
    CHECK(fwd0.total.scalar_value() == 0.7 * fwd0.giou_loss.scalar_value());

    // doubling both weights doubles the loss and the gradients
    cfg.weights = {1.0, 1.0};
    for (auto& p : m.parameters()) p.tensor.zero_grad();
    pretrain::forward_scene_loss(m, scene, cfg, 77).total.backward();
    const std::vector<double> g1 = m.parameter("box_head.fc2.w").grad();

    cfg.weights = {2.0, 2.0};
    for (auto& p : m.parameters()) p.tensor.zero_grad();
    pretrain::forward_scene_loss(m, scene, cfg, 77).total.backward();
    const std::vector<double> g2 = m.parameter("box_head.fc2.w").grad();
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-9));
}

TEST_CASE("toggle semantics: disabled pipelines contribute nothing") {
    ModeModel m(tiny_scene_cfg(), tiny_object_cfg(), 4, 32);
    const geom::PointSet scene = tiny_scene(4);

    // object reconstruction off
    PretrainConfig cfg = tiny_pretrain_cfg();
    cfg.toggles.object_reconstruction = false;
    cfg.toggles.joint_coupling = false;
    for (auto& p : m.parameters()) p.tensor.zero_grad();
    const auto no_rec = pretrain::forward_scene_loss(m, scene, cfg, 5);
    CHECK(no_rec.cd.scalar_value() == 0.0);
    no_rec.total.backward();
    CHECK(grad_sq_for_prefix(m, "object.dec") == 0.0);
    CHECK(grad_sq_for_prefix(m, "rec_head") == 0.0);
    CHECK(grad_sq_for_prefix(m, "object.enc") == 0.0);  // joint off: nothing reaches the object expert

    // scene regression off
    cfg = tiny_pretrain_cfg();
    cfg.toggles.scene_regression = false;
    cfg.toggles.joint_coupling = false;
    for (auto& p : m.parameters()) p.tensor.zero_grad();
    const auto no_reg = pretrain::forward_scene_loss(m, scene, cfg, 5);
    CHECK(no_reg.giou_loss.scalar_value() == 0.0);
    no_reg.total.backward();
    CHECK(grad_sq_for_prefix(m, "scene.") == 0.0);
    CHECK(grad_sq_for_prefix(m, "box_head") == 0.0);
    CHECK(grad_sq_for_prefix(m, "queries") == 0.0);
    CHECK(grad_sq_for_prefix(m, "object.dec") > 0.0);
}

TEST_CASE("joint coupling off makes scene outputs independent of the object expert") {
    const geom::PointSet scene = tiny_scene(6);
    PretrainConfig cfg = tiny_pretrain_cfg();
    cfg.toggles.joint_coupling = false;

    ModeModel m(tiny_scene_cfg(), tiny_object_cfg(), 4, 33);
    const auto before = pretrain::forward_scene_loss(m, scene, cfg, 9);
    const std::vector<double> boxes_before = before.boxes.center.values();
    const double giou_before = before.giou_loss.scalar_value();

    // perturb every object-encoder parameter
    for (const auto& p : m.parameters()) {
        if (p.name.rfind("object.", 0) == 0) {
            ad::Tensor t = p.tensor;
            for (double& v : t.values()) v += 0.37;
        }
    }
    const auto after = pretrain::forward_scene_loss(m, scene, cfg, 9);
    CHECK(after.boxes.center.values() == boxes_before);  // bit-identical
    CHECK(after.giou_loss.scalar_value() == giou_before);
}

TEST_CASE("stop gradient isolates the regression loss from the object encoder") {
    const geom::PointSet scene = tiny_scene(8);
    ModeModel m(tiny_scene_cfg(), tiny_object_cfg(), 4, 34);

    // isolate the giou term: lambda1 = 0
    PretrainConfig cfg = tiny_pretrain_cfg();
    cfg.weights = {0.0, 1.0};

    cfg.toggles.stop_gradient = true;
    for (auto& p : m.parameters()) p.tensor.zero_grad();
    pretrain::forward_scene_loss(m, scene, cfg, 13).total.backward();
    CHECK(grad_sq_for_prefix(m, "object.enc") == 0.0);
    CHECK(grad_sq_for_prefix(m, "object.embed") == 0.0);
    CHECK(grad_sq_for_prefix(m, "project.") > 0.0);  // projection trains behind the barrier

    cfg.toggles.stop_gradient = false;
    for (auto& p : m.parameters()) p.tensor.zero_grad();
    pretrain::forward_scene_loss(m, scene, cfg, 13).total.backward();
    CHECK(grad_sq_for_prefix(m, "object.enc") > 1e-16);
}

TEST_CASE("coordinate transform toggle feeds scene-space blocks when off") {
    const geom::PointSet scene = tiny_scene(10);
    ModeModel m(tiny_scene_cfg(), tiny_object_cfg(), 4, 35);
    PretrainConfig cfg = tiny_pretrain_cfg();
    cfg.toggles.scene_rotation_aug = false;
    cfg.toggles.block_rotation_aug = false;

    const auto with_transform = pretrain::forward_scene_loss(m, scene, cfg, 21);
    cfg.toggles.coord_transform = false;
    const auto without = pretrain::forward_scene_loss(m, scene, cfg, 21);
    // same blocks (same rng streams) but different object-space inputs
    CHECK(with_transform.cd.scalar_value() != without.cd.scalar_value());
    REQUIRE(with_transform.gt.size() == without.gt.size());
    for (std::size_t i = 0; i < with_transform.gt.size(); ++i)
        CHECK(with_transform.gt[i].center == without.gt[i].center);
}

TEST_CASE("augmentation draws use a dedicated stream") {
    const geom::PointSet scene = tiny_scene(12);
    ModeModel m(tiny_scene_cfg(), tiny_object_cfg(), 4, 36);
    PretrainConfig cfg = tiny_pretrain_cfg();
    cfg.toggles.scene_rotation_aug = false;

    cfg.toggles.block_rotation_aug = true;
    const auto with_rot = pretrain::forward_scene_loss(m, scene, cfg, 33);
    cfg.toggles.block_rotation_aug = false;
    const auto without_rot = pretrain::forward_scene_loss(m, scene, cfg, 33);
    // block sampling is unchanged: identical ground-truth boxes
    REQUIRE(with_rot.gt.size() == without_rot.gt.size());
    for (std::size_t i = 0; i < with_rot.gt.size(); ++i) {
        CHECK(with_rot.gt[i].center == without_rot.gt[i].center);
        CHECK(with_rot.gt[i].half == without_rot.gt[i].half);
    }
}

TEST_CASE("pretrain_step is deterministic and reports consistent losses") {
    const geom::PointSet scene = tiny_scene(14);
    PretrainConfig cfg = tiny_pretrain_cfg();

    std::vector<double> trace1, trace2;
    for (int run = 0; run < 2; ++run) {
        ModeModel m(tiny_scene_cfg(), tiny_object_cfg(), 4, 37);
        optim::AdamW opt(m.parameter_tensors(), cfg.opt);
        std::vector<double>& trace = run == 0 ? trace1 : trace2;
        for (int s = 0; s < 4; ++s) {
            const auto stats = pretrain::pretrain_step(m, {&scene}, cfg, opt, s);
            trace.push_back(stats.loss_total);
            CHECK(std::abs(stats.loss_total -
                           (cfg.weights.lambda1 * stats.loss_cd + cfg.weights.lambda2 * stats.loss_giou)) < 1e-12);
            CHECK(stats.grad_norm > 0.0);
        }
    }
    CHECK(trace1 == trace2);  // bit-identical
}

TEST_CASE("pretrain_run step accounting, hooks, and resume") {
    std::vector<geom::PointSet> scenes;
    for (int i = 0; i < 4; ++i) scenes.push_back(tiny_scene(20 + i));
    PretrainConfig cfg = tiny_pretrain_cfg();
    cfg.epochs = 2;
    cfg.batch_size = 2;

    // 0 epochs: no steps, one final checkpoint callback
    {
        ModeModel m(tiny_scene_cfg(), tiny_object_cfg(), 4, 38);
        optim::AdamW opt(m.parameter_tensors(), cfg.opt);
        PretrainConfig zero = cfg;
        zero.epochs = 0;
        int steps = 0, checkpoints = 0;
        pretrain::RunHooks hooks;
        hooks.on_step = [&](std::uint64_t, int, const pretrain::StepStats&, double) { ++steps; };
        hooks.on_checkpoint = [&](std::uint64_t) { ++checkpoints; };
        CHECK(pretrain::pretrain_run(m, scenes, zero, opt, 0, hooks) == 0);
        CHECK(steps == 0);
        CHECK(checkpoints == 1);
    }

    // full run vs run-then-resume produce bit-identical parameters
    std::vector<double> full_trace;
    ModeModel full(tiny_scene_cfg(), tiny_object_cfg(), 4, 39);
    {
        optim::AdamW opt(full.parameter_tensors(), cfg.opt);
        pretrain::RunHooks hooks;
        hooks.on_step = [&](std::uint64_t, int, const pretrain::StepStats& st, double) {
            full_trace.push_back(st.loss_total);
        };
        CHECK(pretrain::pretrain_run(full, scenes, cfg, opt, 0, hooks) == 4);  // 2 epochs x 2 batches
    }

    ModeModel resumed(tiny_scene_cfg(), tiny_object_cfg(), 4, 39);
    std::vector<double> resume_trace;
    {
        optim::AdamW opt(resumed.parameter_tensors(), cfg.opt);
        PretrainConfig half = cfg;
        half.max_steps = 2;
        pretrain::RunHooks hooks;
        hooks.on_step = [&](std::uint64_t, int, const pretrain::StepStats& st, double) {
            resume_trace.push_back(st.loss_total);
        };
        CHECK(pretrain::pretrain_run(resumed, scenes, half, opt, 0, hooks) == 2);
        CHECK(pretrain::pretrain_run(resumed, scenes, cfg, opt, 2, hooks) == 4);
    }
    CHECK(full_trace == resume_trace);
    for (std::size_t i = 0; i < full.parameters().size(); ++i)
        CHECK(full.parameters()[i].tensor.values() == resumed.parameters()[i].tensor.values());
}

TEST_CASE("end-to-end joint loss gradient check on a micro model") {
    const diag::GradCheckResult r = diag::run_end_to_end_grad_check(1e-4, 1e-5);
    INFO("max rel error ", r.max_rel_error);
    CHECK(r.pass);
}
