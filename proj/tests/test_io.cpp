/* SPDX-License-Identifier: Apache-2.0 */
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pointmode/checkpoint.hpp"
#include "pointmode/config.hpp"
#include "pointmode/metrics.hpp"
#include "pointmode/rng.hpp"
#include "pointmode/storage.hpp"

using namespace pointmode;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("pointmode_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

geom::PointSet random_points(Rng& rng, int n) {
    std::vector<geom::Vec3> pts;
    for (int i = 0; i < n; ++i) pts.push_back({rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(0, 3)});
    return geom::PointSet(std::move(pts));
}

io::RunConfig tiny_config() {
    io::RunConfig cfg;
    cfg.scenegen.spec.scene_points = 192;
    cfg.scenegen.spec.objects_min = 1;
    cfg.scenegen.spec.objects_max = 2;
    cfg.scenegen.shape_points = 32;
    cfg.scenegen.train_scenes = 2;
    cfg.scenegen.val_scenes = 1;
    cfg.scenegen.test_scenes = 1;
    cfg.scenegen.train_shapes = 8;
    cfg.scenegen.val_shapes = 4;
    cfg.scenegen.test_shapes = 4;
    cfg.scene_expert.patch_count = 8;
    cfg.scene_expert.patch_size = 8;
    cfg.scene_expert.feature_dim = 16;
    cfg.scene_expert.encoder_layers = 1;
    cfg.scene_expert.decoder_layers = 1;
    cfg.scene_expert.query_count = 2;
    cfg.scene_expert.heads = 2;
    cfg.object_expert.patch_count = 4;
    cfg.object_expert.patch_size = 8;
    cfg.object_expert.feature_dim = 16;
    cfg.object_expert.encoder_layers = 1;
    cfg.object_expert.decoder_layers = 1;
    cfg.object_expert.heads = 2;
    cfg.blocks.block.block_count = 2;
    cfg.blocks.block.block_points = 16;
    return cfg;
}

}  // namespace

TEST_CASE("config parses defaults, rejects unknown keys, echo round-trips") {
    const io::RunConfig defaults = io::parse_run_config(nlohmann::json::object());
    CHECK(defaults.seed == 1);
    CHECK(defaults.precision == "f64");
    CHECK(defaults.object_expert.mask_ratio == 0.6);
    CHECK(defaults.scene_expert.decoder_layers == 8);

    const nlohmann::json partial = {{"seed", 9}, {"pretrain", {{"lambda2", 0.5}, {"matching", "hungarian"}}}};
    const io::RunConfig cfg = io::parse_run_config(partial);
    CHECK(cfg.seed == 9);
    CHECK(cfg.pretrain.lambda2 == 0.5);
    CHECK(cfg.pretrain_config().matching == pretrain::MatchMode::kHungarian);

    CHECK_THROWS_AS(io::parse_run_config({{"sed", 9}}), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_run_config({{"pretrain", {{"lamda1", 1.0}}}}), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_run_config({{"precision", "f16"}}), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_run_config({{"blocks", {{"center_mode", "median"}}}}), std::invalid_argument);

    // full echo reparses to the same echo
    const nlohmann::json echo = io::to_json(cfg);
    const io::RunConfig again = io::parse_run_config(echo);
    CHECK(io::to_json(again) == echo);
    CHECK(io::config_fingerprint(cfg) == io::config_fingerprint(again));
    CHECK(io::config_fingerprint(cfg) != io::config_fingerprint(defaults));
}

TEST_CASE("point cloud text and binary formats round-trip at float precision") {
    TempDir dir;
    Rng rng(81);
    const geom::PointSet pts = random_points(rng, 100);

    io::save_points_binary(dir.file("a.pmd"), pts);
    const geom::PointSet bin = io::load_points_binary(dir.file("a.pmd"));
    REQUIRE(bin.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int d = 0; d < 3; ++d) CHECK(bin[i][d] == static_cast<double>(static_cast<float>(pts[i][d])));

    io::save_points_text(dir.file("a.xyz"), pts);
    const geom::PointSet txt = io::load_points_text(dir.file("a.xyz"));
    REQUIRE(txt.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int d = 0; d < 3; ++d) CHECK(txt[i][d] == bin[i][d]);  // both carry exactly f32 values

    // a second save of the loaded values is byte-identical
    io::save_points_binary(dir.file("b.pmd"), bin);
    CHECK(io::read_file(dir.file("a.pmd")) == io::read_file(dir.file("b.pmd")));

    CHECK_THROWS_AS(io::load_points_binary(dir.file("a.xyz")), std::runtime_error);
    CHECK_THROWS_AS(io::load_points_binary(dir.file("missing.pmd")), std::runtime_error);
}

TEST_CASE("checkpoint save-load-save is byte-identical in both dtypes") {
    TempDir dir;
    const io::RunConfig cfg = tiny_config();
    model::ModeModel m(cfg.scene_expert, cfg.object_expert, 4, 7);
    optim::AdamW opt(m.parameter_tensors(), {1e-3, 0.01, 0.9, 0.999, 1e-8});

    for (const std::uint8_t dtype : {std::uint8_t{0}, std::uint8_t{1}}) {
        const std::string p1 = dir.file("ck_a" + std::to_string(dtype) + ".pmck");
        const std::string p2 = dir.file("ck_b" + std::to_string(dtype) + ".pmck");
        const io::Checkpoint ck = io::snapshot(m, &opt, io::to_json(cfg).dump(), 17, cfg.seed, dtype);
        io::save_checkpoint(p1, ck);
        const io::Checkpoint loaded = io::load_checkpoint(p1);
        CHECK(loaded.global_step == 17);
        CHECK(loaded.config_json == io::to_json(cfg).dump());
        io::save_checkpoint(p2, loaded);
        CHECK(io::read_file(p1) == io::read_file(p2));
    }
}

TEST_CASE("checkpoint restores model and optimizer state exactly") {
    TempDir dir;
    const io::RunConfig cfg = tiny_config();
    model::ModeModel a(cfg.scene_expert, cfg.object_expert, 4, 8);
    optim::AdamW opt_a(a.parameter_tensors(), {1e-3, 0.01, 0.9, 0.999, 1e-8});

    // a couple of steps so moments are nonzero
    Rng rng(82);
    const geom::PointSet shape = random_points(rng, 64);
    for (int s = 0; s < 2; ++s) {
        opt_a.zero_grad();
        ad::mean_all(a.classify_logits(shape)).backward();
        opt_a.step();
    }

    const std::string path = dir.file("ck.pmck");
    io::save_checkpoint(path, io::snapshot(a, &opt_a, io::to_json(cfg).dump(), 2, cfg.seed, 0));

    model::ModeModel b(cfg.scene_expert, cfg.object_expert, 4, 999);
    optim::AdamW opt_b(b.parameter_tensors(), {1e-3, 0.01, 0.9, 0.999, 1e-8});
    const io::Checkpoint ck = io::load_checkpoint(path);
    io::restore_model(b, ck);
    io::restore_optimizer(opt_b, b, ck);

    for (std::size_t i = 0; i < a.parameters().size(); ++i)
        CHECK(a.parameters()[i].tensor.values() == b.parameters()[i].tensor.values());
    CHECK(opt_b.step_count() == opt_a.step_count());
    CHECK(opt_b.first_moments() == opt_a.first_moments());
    CHECK(opt_b.second_moments() == opt_a.second_moments());
}

TEST_CASE("future checkpoint versions fail fast") {
    TempDir dir;
    const std::string path = dir.file("future.pmck");
    std::string bytes = io::read_file([&] {
        const io::RunConfig cfg = tiny_config();
        model::ModeModel m(cfg.scene_expert, cfg.object_expert, 4, 7);
        const std::string p = dir.file("cur.pmck");
        io::save_checkpoint(p, io::snapshot(m, nullptr, "{}", 0, 1, 0));
        return p;
    }());
    bytes[4] = 99;  // bump the version field
    io::write_file_atomic(path, bytes);
    CHECK_THROWS_WITH_AS(io::load_checkpoint(path), doctest::Contains("version"), std::runtime_error);
}

TEST_CASE("dataset write/load with checksum verification") {
    TempDir dir;
    const io::RunConfig cfg = tiny_config();
    io::dataset::write(cfg, dir.file("data"));

    const auto scenes = io::dataset::load_scenes(dir.file("data"), "train");
    CHECK(scenes.size() == 2);
    CHECK(scenes[0].points.size() == 192);
    CHECK_FALSE(scenes[0].placed.empty());

    const auto shapes = io::dataset::load_shapes(dir.file("data"), "val");
    CHECK(shapes.size() == 4);
    CHECK(shapes[0].points.size() == 32);

    // rerun produces identical manifests (deterministic generation)
    io::dataset::write(cfg, dir.file("data2"));
    CHECK(io::read_file(dir.file("data/manifest.json")) == io::read_file(dir.file("data2/manifest.json")));

    // corrupt one scene file: the loader must detect it
    const std::string victim = dir.file("data/scenes/train/scene_000100.pmd");
    std::string bytes = io::read_file(victim);
    bytes[bytes.size() / 2] ^= 0x5a;
    io::write_file_atomic(victim, bytes);
    CHECK_THROWS_WITH_AS(io::dataset::load_scenes(dir.file("data"), "train"), doctest::Contains("checksum"),
                         std::runtime_error);
}

TEST_CASE("metrics writer emits one parseable record per step") {
    TempDir dir;
    const std::string path = dir.file("metrics.log");
    {
        io::MetricsWriter w(path, false);
        pretrain::StepStats st;
        st.loss_total = 1.5;
        st.loss_cd = 1.0;
        st.loss_giou = 0.5;
        st.grad_norm = 2.25;
        w.write_step(0, 0, st, 12.5);
        st.loss_total = 0.75;
        w.write_step(1, 0, st, 11.0);
    }
    const auto records = io::read_metrics(path);
    REQUIRE(records.size() == 2);
    CHECK(records[0].number("step") == 0);
    CHECK(records[0].number("loss_total") == 1.5);
    CHECK(records[1].number("loss_total") == 0.75);
    CHECK(records[1].number("loss_giou") == 0.5);

    // append mode continues the log
    {
        io::MetricsWriter w(path, true);
        pretrain::StepStats st;
        w.write_step(2, 1, st, 1.0);
    }
    CHECK(io::read_metrics(path).size() == 3);
}

TEST_CASE("atomic writes leave no temp files behind") {
    TempDir dir;
    io::write_file_atomic(dir.file("x/y/z.txt"), "hello");
    CHECK(io::read_file(dir.file("x/y/z.txt")) == "hello");
    CHECK_FALSE(fs::exists(dir.file("x/y/z.txt.tmp")));
}
