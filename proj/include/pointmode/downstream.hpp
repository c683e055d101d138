/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pointmode/matching.hpp"
#include "pointmode/model.hpp"
#include "pointmode/optim.hpp"
#include "pointmode/scenegen.hpp"

namespace pointmode::downstream {

struct EvalReport {
    std::string task;
    std::vector<std::pair<std::string, double>> metrics;  // all values in [0, 1]
    int samples = 0;
    std::string config_fingerprint;

    double metric(const std::string& name) const;
    std::string to_line() const;  // single structured key:value record
};

struct FinetuneConfig {
    int epochs = 20;
    int batch_size = 8;
    optim::AdamWConfig opt{1e-3, 0.05, 0.9, 0.999, 1e-8};
    std::uint64_t seed = 7;
};

// Object expert + classification head trained with cross-entropy; only the
// object_classify parameter set is optimized, everything else stays
// bit-identical. Needs at least two classes in the data.
void finetune_classify(model::ModeModel& model, const std::vector<gen::LabeledShape>& shapes,
                       const FinetuneConfig& cfg);

EvalReport eval_classify(const model::ModeModel& model, const std::vector<gen::LabeledShape>& shapes);

struct LocalizeEvalConfig {
    blocks::BlockConfig block;
    geom::CenterMode box_center_mode = geom::CenterMode::kMean;
    pretrain::MatchMode matching = pretrain::MatchMode::kAssigned;
    bool coord_transform = true;
    bool strict_normalize = false;
    double mask_ratio = -1.0;  // <0: use the model's training ratio
    std::uint64_t eval_seed = 9001;
};

// Samples blocks per scene with a fixed eval seed, runs the full scene
// pipeline, pairs predictions to ground truth, and reports mean IoU plus
// recall at IoU 0.25 / 0.5 over all ground-truth boxes.
EvalReport eval_localize(const model::ModeModel& model, const std::vector<gen::Scene>& scenes,
                         const LocalizeEvalConfig& cfg);

// Per-ground-truth best-matched IoU accumulation shared by eval_localize.
struct LocalizeTally {
    double iou_sum = 0.0;
    int gt_total = 0;
    int hits25 = 0;
    int hits50 = 0;
};
void tally_localization(const std::vector<geom::Box3D>& preds, const std::vector<geom::Box3D>& gts,
                        const pretrain::Pairing& pairing, LocalizeTally& tally);

}  // namespace pointmode::downstream
