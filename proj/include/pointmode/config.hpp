/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "pointmode/blocks.hpp"
#include "pointmode/downstream.hpp"
#include "pointmode/model.hpp"
#include "pointmode/pretrain.hpp"
#include "pointmode/scenegen.hpp"

namespace pointmode::io {

struct ScenegenSection {
    gen::SceneSpec spec;
    int shape_points = 128;
    int train_scenes = 16;
    int val_scenes = 4;
    int test_scenes = 4;
    int train_shapes = 256;
    int val_shapes = 64;
    int test_shapes = 64;
    std::uint64_t scene_seed_base = 100;
    std::uint64_t shape_seed_base = 50000;
};

struct BlocksSection {
    blocks::BlockConfig block;
    std::string center_mode = "mean";  // "mean" | "midpoint"
    bool strict_normalize = false;

    geom::CenterMode mode() const;
};

struct PretrainSection {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lr = 1e-3;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int epochs = 100;
    int max_steps = 0;
    int batch_size = 1;
    std::string lr_schedule = "constant";
    std::string matching = "assigned";  // "assigned" | "hungarian"
    int checkpoint_every = 100;
    bool scene_regression = true;
    bool object_reconstruction = true;
    bool coord_transform = true;
    bool joint_coupling = true;
    bool stop_gradient = true;
    bool scene_rotation_aug = true;
    bool block_rotation_aug = true;
};

struct FinetuneSection {
    int epochs = 20;
    int batch_size = 8;
    double lr = 1e-3;
    double weight_decay = 0.05;
};

struct EvalSection {
    std::uint64_t seed = 9001;
    double mask_ratio = -1.0;  // <0: training ratio
};

// Full configuration tree. Every field has a default; unknown keys in a
// config file are rejected; the resolved tree is echoed into every artifact.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string precision = "f64";  // checkpoint storage: "f64" | "f32"
    ScenegenSection scenegen;
    BlocksSection blocks;
    model::ObjectExpertConfig object_expert;
    model::SceneExpertConfig scene_expert;
    PretrainSection pretrain;
    FinetuneSection finetune;
    EvalSection eval;

    pretrain::PretrainConfig pretrain_config() const;
    downstream::FinetuneConfig finetune_config() const;
    downstream::LocalizeEvalConfig localize_eval_config() const;
    void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& cfg);
std::string config_fingerprint(const RunConfig& cfg);  // 8-hex-digit checksum of the canonical echo

}  // namespace pointmode::io
