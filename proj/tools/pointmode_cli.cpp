/* SPDX-License-Identifier: Apache-2.0 */
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pointmode/checkpoint.hpp"
#include "pointmode/config.hpp"
#include "pointmode/diagnostics.hpp"
#include "pointmode/downstream.hpp"
#include "pointmode/metrics.hpp"
#include "pointmode/pretrain.hpp"
#include "pointmode/storage.hpp"

namespace fs = std::filesystem;
using namespace pointmode;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::string data_dir;
    std::string checkpoint_path;
    std::string task;
    std::int64_t seed = -1;
    std::string precision;
    bool resume = false;
};

io::RunConfig resolve_config(const CommonArgs& args) {
    io::RunConfig cfg = args.config_path.empty() ? io::RunConfig{} : io::load_run_config(args.config_path);
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    if (!args.precision.empty()) cfg.precision = args.precision;
    cfg.validate();
    return cfg;
}

std::uint8_t dtype_of(const io::RunConfig& cfg) { return cfg.precision == "f32" ? 1 : 0; }

model::ModeModel build_model(const io::RunConfig& cfg) {
    return model::ModeModel(cfg.scene_expert, cfg.object_expert, gen::kShapeClassCount, cfg.seed);
}

void require_compatible(const io::RunConfig& cfg, const io::Checkpoint& ckpt) {
    const io::RunConfig stored = io::parse_run_config(nlohmann::json::parse(ckpt.config_json));
    const model::ModeModel a = build_model(cfg);
    const model::ModeModel b = build_model(stored);
    if (a.architecture_fingerprint() != b.architecture_fingerprint())
        throw std::runtime_error("checkpoint is incompatible with the configured architecture: checkpoint " +
                                 b.architecture_fingerprint() + " vs config " + a.architecture_fingerprint());
}

int cmd_gen_data(const CommonArgs& args) {
    const io::RunConfig cfg = resolve_config(args);
    io::dataset::write(cfg, args.out_dir);
    std::printf("dataset written to %s (scenes %d/%d/%d, shapes %d/%d/%d)\n", args.out_dir.c_str(),
                cfg.scenegen.train_scenes, cfg.scenegen.val_scenes, cfg.scenegen.test_scenes,
                cfg.scenegen.train_shapes, cfg.scenegen.val_shapes, cfg.scenegen.test_shapes);
    return 0;
}

int cmd_pretrain(const CommonArgs& args) {
    const io::RunConfig cfg = resolve_config(args);
    if (args.data_dir.empty()) throw std::runtime_error("pretrain: --data is required");
    const std::vector<gen::Scene> scenes = io::dataset::load_scenes(args.data_dir, "train");
    std::vector<geom::PointSet> scene_points;
    scene_points.reserve(scenes.size());
    for (const gen::Scene& s : scenes) scene_points.push_back(s.points);

    model::ModeModel model = build_model(cfg);
    optim::AdamW opt(model.parameter_tensors(), cfg.pretrain_config().opt);

    fs::create_directories(args.out_dir);
    const std::string ckpt_path = (fs::path(args.out_dir) / "checkpoint.pmck").string();
    const std::string metrics_path = (fs::path(args.out_dir) / "metrics.log").string();
    const std::string config_json = io::to_json(cfg).dump();

    std::uint64_t start_step = 0;
    if (args.resume) {
        const io::Checkpoint ckpt = io::load_checkpoint(ckpt_path);
        require_compatible(cfg, ckpt);
        io::restore_model(model, ckpt);
        io::restore_optimizer(opt, model, ckpt);
        start_step = ckpt.global_step;
        std::printf("resuming from step %llu\n", static_cast<unsigned long long>(start_step));
    }

    io::MetricsWriter metrics(metrics_path, args.resume);
    pretrain::RunHooks hooks;
    hooks.on_step = [&](std::uint64_t step, int epoch, const pretrain::StepStats& st, double wall_ms) {
        metrics.write_step(step, epoch, st, wall_ms);
    };
    hooks.on_checkpoint = [&](std::uint64_t completed) {
        io::save_checkpoint(ckpt_path, io::snapshot(model, &opt, config_json, completed, cfg.seed, dtype_of(cfg)));
    };

    const std::uint64_t steps = pretrain::pretrain_run(model, scene_points, cfg.pretrain_config(), opt, start_step, hooks);
    std::printf("pretraining complete: %llu steps, checkpoint %s\n", static_cast<unsigned long long>(steps),
                ckpt_path.c_str());
    return 0;
}

int cmd_finetune(const CommonArgs& args) {
    const io::RunConfig cfg = resolve_config(args);
    if (args.data_dir.empty()) throw std::runtime_error("finetune: --data is required");
    if (args.checkpoint_path.empty()) throw std::runtime_error("finetune: --checkpoint is required");
    const model::Task task = model::task_from_name(args.task.empty() ? "object_classify" : args.task);
    if (task != model::Task::kObjectClassify)
        throw std::runtime_error("finetune: only object_classify fine-tuning is supported");

    const io::Checkpoint ckpt = io::load_checkpoint(args.checkpoint_path);
    const io::RunConfig resolved = resolve_config(args);
    require_compatible(resolved, ckpt);
    model::ModeModel model = build_model(resolved);
    io::restore_model(model, ckpt);

    const std::vector<gen::LabeledShape> train = io::dataset::load_shapes(args.data_dir, "train");
    downstream::finetune_classify(model, train, cfg.finetune_config());

    fs::create_directories(args.out_dir);
    const std::string out_ckpt = (fs::path(args.out_dir) / "checkpoint_finetuned.pmck").string();
    io::save_checkpoint(out_ckpt,
                        io::snapshot(model, nullptr, io::to_json(cfg).dump(), ckpt.global_step, cfg.seed, dtype_of(cfg)));

    const downstream::EvalReport report = downstream::eval_classify(model, io::dataset::load_shapes(args.data_dir, "val"));
    const std::string report_path = (fs::path(args.out_dir) / "report_finetune.txt").string();
    io::write_file_atomic(report_path, report.to_line() + "\n");
    std::printf("%s\n", report.to_line().c_str());
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    const io::RunConfig cfg = resolve_config(args);
    if (args.data_dir.empty()) throw std::runtime_error("eval: --data is required");
    if (args.checkpoint_path.empty()) throw std::runtime_error("eval: --checkpoint is required");
    const model::Task task = model::task_from_name(args.task);

    const io::Checkpoint ckpt = io::load_checkpoint(args.checkpoint_path);
    require_compatible(cfg, ckpt);
    model::ModeModel model = build_model(cfg);
    io::restore_model(model, ckpt);

    downstream::EvalReport report;
    if (task == model::Task::kObjectClassify) {
        report = downstream::eval_classify(model, io::dataset::load_shapes(args.data_dir, "test"));
    } else if (task == model::Task::kSceneLocalize) {
        const std::vector<gen::Scene> scenes = io::dataset::load_scenes(args.data_dir, "test");
        report = downstream::eval_localize(model, scenes, cfg.localize_eval_config());
    } else {
        throw std::runtime_error("eval: task must be object_classify or scene_localize");
    }
    fs::create_directories(args.out_dir);
    const std::string report_path = (fs::path(args.out_dir) / ("report_" + std::string(model::task_name(task)) + ".txt")).string();
    io::write_file_atomic(report_path, report.to_line() + "\n");
    std::printf("%s\n", report.to_line().c_str());
    return 0;
}

int cmd_grad_check(const CommonArgs&) {
    int failures = 0;
    for (const diag::GradCheckResult& r : diag::run_primitive_grad_checks()) {
        std::printf("%-22s max_rel_error %.3e  %s\n", r.name.c_str(), r.max_rel_error, r.pass ? "ok" : "FAIL");
        if (!r.pass) ++failures;
    }
    const diag::GradCheckResult e2e = diag::run_end_to_end_grad_check();
    std::printf("%-22s max_rel_error %.3e  %s\n", e2e.name.c_str(), e2e.max_rel_error, e2e.pass ? "ok" : "FAIL");
    if (!e2e.pass) ++failures;
    std::printf("%s\n", failures == 0 ? "all gradient checks passed" : "gradient checks FAILED");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"point cloud mixture-of-domain-experts: data generation, pretraining, fine-tuning, evaluation"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&args](CLI::App* cmd, bool needs_out) {
        cmd->add_option("--config", args.config_path, "configuration file (JSON)");
        if (needs_out) cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--data", args.data_dir, "dataset directory");
        cmd->add_option("--checkpoint", args.checkpoint_path, "checkpoint file");
        cmd->add_option("--task", args.task, "task name");
        cmd->add_option("--seed", args.seed, "seed override");
        cmd->add_option("--precision", args.precision, "checkpoint storage precision (f32|f64)")
            ->check(CLI::IsMember({"f32", "f64"}));
        cmd->add_flag("--resume", args.resume, "resume from the output checkpoint");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
    add_common(gen, true);
    CLI::App* pre = app.add_subcommand("pretrain", "run block-to-scene pretraining");
    add_common(pre, true);
    CLI::App* fin = app.add_subcommand("finetune", "fine-tune a downstream head");
    add_common(fin, true);
    CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(ev, true);
    CLI::App* gc = app.add_subcommand("grad-check", "run the gradient verification suite");
    add_common(gc, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(args);
        if (pre->parsed()) return cmd_pretrain(args);
        if (fin->parsed()) return cmd_finetune(args);
        if (ev->parsed()) return cmd_eval(args);
        if (gc->parsed()) return cmd_grad_check(args);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
