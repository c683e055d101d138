/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "pointmode/blocks.hpp"
#include "pointmode/pretrain.hpp"
#include "pointmode/rng.hpp"

namespace pointmode::downstream {

using ad::Tensor;

double EvalReport::metric(const std::string& name) const {
    for (const auto& [k, v] : metrics) {
        if (k == name) return v;
    }
    throw std::invalid_argument("EvalReport: no metric '" + name + "'");
}

std::string EvalReport::to_line() const {
    std::string line = "task:" + task;
    char buf[64];
    for (const auto& [k, v] : metrics) {
        std::snprintf(buf, sizeof(buf), " %s:%.17g", k.c_str(), v);
        line += buf;
    }
    line += " samples:" + std::to_string(samples);
    line += " config:" + config_fingerprint;
    return line;
}

void finetune_classify(model::ModeModel& model, const std::vector<gen::LabeledShape>& shapes,
                       const FinetuneConfig& cfg) {
    if (shapes.empty()) throw std::invalid_argument("finetune_classify: empty dataset");
    std::set<int> classes;
    for (const gen::LabeledShape& s : shapes) classes.insert(static_cast<int>(s.label));
    if (classes.size() < 2) throw std::invalid_argument("finetune_classify: need at least 2 classes");

    const std::vector<model::NamedParam> active = model.active_parameters(model::Task::kObjectClassify);
    std::vector<Tensor> active_tensors;
    active_tensors.reserve(active.size());
    for (const model::NamedParam& p : active) active_tensors.push_back(p.tensor);
    optim::AdamW opt(active_tensors, cfg.opt);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order(shapes.size());
        for (std::size_t i = 0; i < shapes.size(); ++i) order[i] = static_cast<int>(i);
        Rng rng = Rng::fork(cfg.seed, 0x66696e65ull + static_cast<std::uint64_t>(epoch));
        rng.shuffle(order);

        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const std::size_t end = std::min(at + static_cast<std::size_t>(cfg.batch_size), order.size());
            std::vector<Tensor> logits;
            std::vector<int> labels;
            logits.reserve(end - at);
            for (std::size_t b = at; b < end; ++b) {
                const gen::LabeledShape& s = shapes[order[b]];
                logits.push_back(model.classify_logits(s.points));
                labels.push_back(static_cast<int>(s.label));
            }
            opt.zero_grad();
            const Tensor loss = ad::cross_entropy(ad::concat_rows(logits), labels);
            loss.backward();
            opt.step();
        }
    }
}

EvalReport eval_classify(const model::ModeModel& model, const std::vector<gen::LabeledShape>& shapes) {
    if (shapes.empty()) throw std::invalid_argument("eval_classify: empty dataset");
    int correct = 0;
    for (const gen::LabeledShape& s : shapes) {
        const Tensor logits = model.classify_logits(s.points);
        const std::vector<double>& v = logits.values();
        int arg = 0;
        for (int c = 1; c < static_cast<int>(v.size()); ++c) {
            if (v[c] > v[arg]) arg = c;
        }
        if (arg == static_cast<int>(s.label)) ++correct;
    }
    EvalReport report;
    report.task = "object_classify";
    report.samples = static_cast<int>(shapes.size());
    report.metrics.emplace_back("accuracy", static_cast<double>(correct) / static_cast<double>(shapes.size()));
    report.config_fingerprint = model.architecture_fingerprint();
    return report;
}

void tally_localization(const std::vector<geom::Box3D>& preds, const std::vector<geom::Box3D>& gts,
                        const pretrain::Pairing& pairing, LocalizeTally& tally) {
    // Best matched IoU per ground-truth box (assigned mode may give a box
    // several queries; take the best).
    std::vector<double> best(gts.size(), 0.0);
    for (const auto& [q, g] : pairing) best[g] = std::max(best[g], geom::iou(preds[q], gts[g]));
    for (double v : best) {
        tally.iou_sum += v;
        if (v >= 0.25) ++tally.hits25;
        if (v >= 0.5) ++tally.hits50;
        ++tally.gt_total;
    }
}

EvalReport eval_localize(const model::ModeModel& model, const std::vector<gen::Scene>& scenes,
                         const LocalizeEvalConfig& cfg) {
    if (scenes.empty()) throw std::invalid_argument("eval_localize: empty scene list");
    const double mask_ratio = cfg.mask_ratio >= 0.0 ? cfg.mask_ratio : model.object_config().mask_ratio;

    LocalizeTally tally;
    for (std::size_t si = 0; si < scenes.size(); ++si) {
        const geom::PointSet& pts = scenes[si].points;
        const std::uint64_t scene_seed = pretrain::derive_seed(cfg.eval_seed, si, 0);
        const blocks::BlockSet bs = blocks::sample_blocks(pts, cfg.block, pretrain::derive_seed(scene_seed, 0, 2));
        const std::vector<geom::Box3D> gt = blocks::gt_boxes(bs, cfg.box_center_mode);

        std::vector<Tensor> block_tokens;
        block_tokens.reserve(bs.count());
        for (int i = 0; i < bs.count(); ++i) {
            const geom::PointSet block_pts = bs.block_points(i);
            const blocks::ObjectBlock ob =
                cfg.coord_transform
                    ? blocks::to_object_space(block_pts, bs.center_point(i), 0, false, cfg.strict_normalize)
                    : blocks::ObjectBlock{block_pts, blocks::BlockTransform{}};
            const model::MaskPlan plan = model::plan_mask(model.object_config().patch_count, mask_ratio,
                                                          pretrain::derive_seed(scene_seed, 2, i));
            block_tokens.push_back(model.object_encode(ob.points, plan).tokens);
        }
        const Tensor pooled = model.block_global_features(block_tokens, true);
        const Tensor scene_tokens = model.scene_encode_tokens(pts);
        const Tensor decoded = model.scene_decode(model.enhance_queries(pooled), scene_tokens);
        const std::vector<geom::Box3D> preds = model.regress_boxes(decoded).to_boxes();

        const pretrain::Pairing pairing = pretrain::match_predictions(preds, gt, cfg.matching);
        tally_localization(preds, gt, pairing, tally);
    }

    EvalReport report;
    report.task = "scene_localize";
    report.samples = static_cast<int>(scenes.size());
    report.metrics.emplace_back("mean_iou", tally.iou_sum / static_cast<double>(tally.gt_total));
    report.metrics.emplace_back("recall_at_025", static_cast<double>(tally.hits25) / static_cast<double>(tally.gt_total));
    report.metrics.emplace_back("recall_at_05", static_cast<double>(tally.hits50) / static_cast<double>(tally.gt_total));
    report.config_fingerprint = model.architecture_fingerprint();
    return report;
}

}  // namespace pointmode::downstream
