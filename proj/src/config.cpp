/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "pointmode/storage.hpp"

namespace pointmode::io {

using nlohmann::json;

namespace {

// Strict section reader: every present key must be consumed exactly once.
class SectionReader {
public:
    SectionReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw std::invalid_argument("config: " + path_ + " must be an object");
    }

    ~SectionReader() = default;

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw std::invalid_argument("config: bad value type for " + path_ + "." + key);
        }
    }

    const json* subsection(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            (void)value;
            if (!seen_.count(key))
                throw std::invalid_argument("config: unknown key '" + path_ + "." + key + "'");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void parse_scenegen(const json& j, ScenegenSection& s) {
    SectionReader r(j, "scenegen");
    r.read("scene_points", s.spec.scene_points);
    r.read("extent_xy", s.spec.extent_xy);
    r.read("extent_z", s.spec.extent_z);
    r.read("objects_min", s.spec.objects_min);
    r.read("objects_max", s.spec.objects_max);
    r.read("clutter_ratio", s.spec.clutter_ratio);
    r.read("shape_points", s.shape_points);
    r.read("train_scenes", s.train_scenes);
    r.read("val_scenes", s.val_scenes);
    r.read("test_scenes", s.test_scenes);
    r.read("train_shapes", s.train_shapes);
    r.read("val_shapes", s.val_shapes);
    r.read("test_shapes", s.test_shapes);
    r.read("scene_seed_base", s.scene_seed_base);
    r.read("shape_seed_base", s.shape_seed_base);
    r.finish();
}

void parse_blocks(const json& j, BlocksSection& s) {
    SectionReader r(j, "blocks");
    r.read("block_count", s.block.block_count);
    r.read("block_points", s.block.block_points);
    r.read("center_mode", s.center_mode);
    r.read("strict_normalize", s.strict_normalize);
    r.finish();
}

void parse_object_expert(const json& j, model::ObjectExpertConfig& c) {
    SectionReader r(j, "object_expert");
    r.read("patch_count", c.patch_count);
    r.read("patch_size", c.patch_size);
    r.read("feature_dim", c.feature_dim);
    r.read("encoder_layers", c.encoder_layers);
    r.read("decoder_layers", c.decoder_layers);
    r.read("heads", c.heads);
    r.read("mask_ratio", c.mask_ratio);
    r.finish();
}

void parse_scene_expert(const json& j, model::SceneExpertConfig& c) {
    SectionReader r(j, "scene_expert");
    r.read("patch_count", c.patch_count);
    r.read("patch_size", c.patch_size);
    r.read("feature_dim", c.feature_dim);
    r.read("encoder_layers", c.encoder_layers);
    r.read("decoder_layers", c.decoder_layers);
    r.read("query_count", c.query_count);
    r.read("heads", c.heads);
    r.finish();
}

void parse_pretrain(const json& j, PretrainSection& s) {
    SectionReader r(j, "pretrain");
    r.read("lambda1", s.lambda1);
    r.read("lambda2", s.lambda2);
    r.read("lr", s.lr);
    r.read("weight_decay", s.weight_decay);
    r.read("beta1", s.beta1);
    r.read("beta2", s.beta2);
    r.read("eps", s.eps);
    r.read("epochs", s.epochs);
    r.read("max_steps", s.max_steps);
    r.read("batch_size", s.batch_size);
    r.read("lr_schedule", s.lr_schedule);
    r.read("matching", s.matching);
    r.read("checkpoint_every", s.checkpoint_every);
    r.read("scene_regression", s.scene_regression);
    r.read("object_reconstruction", s.object_reconstruction);
    r.read("coord_transform", s.coord_transform);
    r.read("joint_coupling", s.joint_coupling);
    r.read("stop_gradient", s.stop_gradient);
    r.read("scene_rotation_aug", s.scene_rotation_aug);
    r.read("block_rotation_aug", s.block_rotation_aug);
    r.finish();
}

void parse_finetune(const json& j, FinetuneSection& s) {
    SectionReader r(j, "finetune");
    r.read("epochs", s.epochs);
    r.read("batch_size", s.batch_size);
    r.read("lr", s.lr);
    r.read("weight_decay", s.weight_decay);
    r.finish();
}

void parse_eval(const json& j, EvalSection& s) {
    SectionReader r(j, "eval");
    r.read("seed", s.seed);
    r.read("mask_ratio", s.mask_ratio);
    r.finish();
}

}  // namespace

geom::CenterMode BlocksSection::mode() const {
    if (center_mode == "mean") return geom::CenterMode::kMean;
    if (center_mode == "midpoint") return geom::CenterMode::kMidpoint;
    throw std::invalid_argument("config: blocks.center_mode must be 'mean' or 'midpoint', got '" + center_mode + "'");
}

RunConfig parse_run_config(const json& j) {
    RunConfig cfg;
    SectionReader r(j, "<root>");
    r.read("seed", cfg.seed);
    r.read("precision", cfg.precision);
    if (const json* s = r.subsection("scenegen")) parse_scenegen(*s, cfg.scenegen);
    if (const json* s = r.subsection("blocks")) parse_blocks(*s, cfg.blocks);
    if (const json* s = r.subsection("object_expert")) parse_object_expert(*s, cfg.object_expert);
    if (const json* s = r.subsection("scene_expert")) parse_scene_expert(*s, cfg.scene_expert);
    if (const json* s = r.subsection("pretrain")) parse_pretrain(*s, cfg.pretrain);
    if (const json* s = r.subsection("finetune")) parse_finetune(*s, cfg.finetune);
    if (const json* s = r.subsection("eval")) parse_eval(*s, cfg.eval);
    r.finish();
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config: parse error in '" + path + "': " + e.what());
    }
    return parse_run_config(j);
}

void RunConfig::validate() const {
    if (precision != "f64" && precision != "f32")
        throw std::invalid_argument("config: precision must be 'f64' or 'f32'");
    blocks.mode();
    object_expert.validate();
    scene_expert.validate();
    pretrain_config().validate();
    if (scenegen.spec.clutter_ratio < 0.0 || scenegen.spec.clutter_ratio > 1.0)
        throw std::invalid_argument("config: scenegen.clutter_ratio must be in [0, 1]");
}

pretrain::PretrainConfig RunConfig::pretrain_config() const {
    pretrain::PretrainConfig cfg;
    cfg.block = blocks.block;
    cfg.weights = {pretrain.lambda1, pretrain.lambda2};
    cfg.opt = {pretrain.lr, pretrain.weight_decay, pretrain.beta1, pretrain.beta2, pretrain.eps};
    cfg.epochs = pretrain.epochs;
    cfg.max_steps = pretrain.max_steps;
    cfg.batch_size = pretrain.batch_size;
    cfg.toggles = {pretrain.scene_regression, pretrain.object_reconstruction, pretrain.coord_transform,
                   pretrain.joint_coupling,   pretrain.stop_gradient,         pretrain.scene_rotation_aug,
                   pretrain.block_rotation_aug};
    if (pretrain.matching == "assigned") {
        cfg.matching = pretrain::MatchMode::kAssigned;
    } else if (pretrain.matching == "hungarian") {
        cfg.matching = pretrain::MatchMode::kHungarian;
    } else {
        throw std::invalid_argument("config: pretrain.matching must be 'assigned' or 'hungarian'");
    }
    cfg.lr_schedule = pretrain.lr_schedule;
    cfg.seed = seed;
    cfg.checkpoint_every = pretrain.checkpoint_every;
    cfg.strict_normalize = blocks.strict_normalize;
    cfg.box_center_mode = blocks.mode();
    return cfg;
}

downstream::FinetuneConfig RunConfig::finetune_config() const {
    downstream::FinetuneConfig cfg;
    cfg.epochs = finetune.epochs;
    cfg.batch_size = finetune.batch_size;
    cfg.opt = {finetune.lr, finetune.weight_decay, 0.9, 0.999, 1e-8};
    cfg.seed = seed + 1;
    return cfg;
}

downstream::LocalizeEvalConfig RunConfig::localize_eval_config() const {
    downstream::LocalizeEvalConfig cfg;
    cfg.block = blocks.block;
    cfg.box_center_mode = blocks.mode();
    cfg.matching = pretrain_config().matching;
    cfg.coord_transform = pretrain.coord_transform;
    cfg.strict_normalize = blocks.strict_normalize;
    cfg.mask_ratio = eval.mask_ratio;
    cfg.eval_seed = eval.seed;
    return cfg;
}

json to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["precision"] = cfg.precision;
    j["scenegen"] = {{"scene_points", cfg.scenegen.spec.scene_points},
                     {"extent_xy", cfg.scenegen.spec.extent_xy},
                     {"extent_z", cfg.scenegen.spec.extent_z},
                     {"objects_min", cfg.scenegen.spec.objects_min},
                     {"objects_max", cfg.scenegen.spec.objects_max},
                     {"clutter_ratio", cfg.scenegen.spec.clutter_ratio},
                     {"shape_points", cfg.scenegen.shape_points},
                     {"train_scenes", cfg.scenegen.train_scenes},
                     {"val_scenes", cfg.scenegen.val_scenes},
                     {"test_scenes", cfg.scenegen.test_scenes},
                     {"train_shapes", cfg.scenegen.train_shapes},
                     {"val_shapes", cfg.scenegen.val_shapes},
                     {"test_shapes", cfg.scenegen.test_shapes},
                     {"scene_seed_base", cfg.scenegen.scene_seed_base},
                     {"shape_seed_base", cfg.scenegen.shape_seed_base}};
    j["blocks"] = {{"block_count", cfg.blocks.block.block_count},
                   {"block_points", cfg.blocks.block.block_points},
                   {"center_mode", cfg.blocks.center_mode},
                   {"strict_normalize", cfg.blocks.strict_normalize}};
    j["object_expert"] = {{"patch_count", cfg.object_expert.patch_count},
                          {"patch_size", cfg.object_expert.patch_size},
                          {"feature_dim", cfg.object_expert.feature_dim},
                          {"encoder_layers", cfg.object_expert.encoder_layers},
                          {"decoder_layers", cfg.object_expert.decoder_layers},
                          {"heads", cfg.object_expert.heads},
                          {"mask_ratio", cfg.object_expert.mask_ratio}};
    j["scene_expert"] = {{"patch_count", cfg.scene_expert.patch_count},
                         {"patch_size", cfg.scene_expert.patch_size},
                         {"feature_dim", cfg.scene_expert.feature_dim},
                         {"encoder_layers", cfg.scene_expert.encoder_layers},
                         {"decoder_layers", cfg.scene_expert.decoder_layers},
                         {"query_count", cfg.scene_expert.query_count},
                         {"heads", cfg.scene_expert.heads}};
    j["pretrain"] = {{"lambda1", cfg.pretrain.lambda1},
                     {"lambda2", cfg.pretrain.lambda2},
                     {"lr", cfg.pretrain.lr},
                     {"weight_decay", cfg.pretrain.weight_decay},
                     {"beta1", cfg.pretrain.beta1},
                     {"beta2", cfg.pretrain.beta2},
                     {"eps", cfg.pretrain.eps},
                     {"epochs", cfg.pretrain.epochs},
                     {"max_steps", cfg.pretrain.max_steps},
                     {"batch_size", cfg.pretrain.batch_size},
                     {"lr_schedule", cfg.pretrain.lr_schedule},
                     {"matching", cfg.pretrain.matching},
                     {"checkpoint_every", cfg.pretrain.checkpoint_every},
                     {"scene_regression", cfg.pretrain.scene_regression},
                     {"object_reconstruction", cfg.pretrain.object_reconstruction},
                     {"coord_transform", cfg.pretrain.coord_transform},
                     {"joint_coupling", cfg.pretrain.joint_coupling},
                     {"stop_gradient", cfg.pretrain.stop_gradient},
                     {"scene_rotation_aug", cfg.pretrain.scene_rotation_aug},
                     {"block_rotation_aug", cfg.pretrain.block_rotation_aug}};
    j["finetune"] = {{"epochs", cfg.finetune.epochs},
                     {"batch_size", cfg.finetune.batch_size},
                     {"lr", cfg.finetune.lr},
                     {"weight_decay", cfg.finetune.weight_decay}};
    j["eval"] = {{"seed", cfg.eval.seed}, {"mask_ratio", cfg.eval.mask_ratio}};
    return j;
}

std::string config_fingerprint(const RunConfig& cfg) {
    const std::string dump = to_json(cfg).dump();
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", crc32_bytes(dump.data(), dump.size()));
    return buf;
}

}  // namespace pointmode::io
