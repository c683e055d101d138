/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/pretrain.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pointmode/rng.hpp"

namespace pointmode::pretrain {

using ad::Tensor;

void PretrainConfig::validate() const {
    if (!toggles.scene_regression && !toggles.object_reconstruction)
        throw std::invalid_argument("PretrainConfig: at least one of scene_regression/object_reconstruction required");
    if (toggles.joint_coupling && !(toggles.scene_regression && toggles.object_reconstruction))
        throw std::invalid_argument("PretrainConfig: joint_coupling requires both pipelines");
    if (weights.lambda1 < 0.0 || weights.lambda2 < 0.0)
        throw std::invalid_argument("PretrainConfig: loss weights must be >= 0");
    if (weights.lambda1 == 0.0 && weights.lambda2 == 0.0)
        throw std::invalid_argument("PretrainConfig: loss weights must not both be zero");
    if (batch_size < 1) throw std::invalid_argument("PretrainConfig: batch_size must be >= 1");
    if (epochs < 0 || max_steps < 0) throw std::invalid_argument("PretrainConfig: negative step budget");
    if (lr_schedule != "constant" && lr_schedule != "cosine")
        throw std::invalid_argument("PretrainConfig: unknown lr_schedule '" + lr_schedule + "'");
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t step, std::uint64_t slot) {
    return mix64(mix64(run_seed ^ mix64(step + 0x9e3779b97f4a7c15ull)) ^ mix64(slot));
}

namespace {

Tensor prod_cols3(const Tensor& t) {
    return ad::mul(ad::mul(ad::slice_cols(t, 0, 1), ad::slice_cols(t, 1, 2)), ad::slice_cols(t, 2, 3));
}

Tensor const_rows3(const std::vector<geom::Vec3>& rows) {
    std::vector<double> flat;
    flat.reserve(rows.size() * 3);
    for (const geom::Vec3& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return Tensor::from_values({static_cast<int>(rows.size()), 3}, std::move(flat));
}

Tensor patch_constant(const geom::PointSet& patch) {
    std::vector<double> flat;
    flat.reserve(patch.size() * 3);
    for (const geom::Vec3& p : patch) flat.insert(flat.end(), p.begin(), p.end());
    return Tensor::from_values({static_cast<int>(patch.size()), 3}, std::move(flat));
}

}  // namespace

Tensor giou_loss_mean(const model::PredBoxes& preds, const std::vector<geom::Box3D>& gts, const Pairing& pairing) {
    if (pairing.empty()) throw std::invalid_argument("giou_loss_mean: empty pairing");
    std::vector<int> query_ids;
    std::vector<geom::Vec3> gt_min, gt_max, gt_half;
    query_ids.reserve(pairing.size());
    for (const auto& [q, g] : pairing) {
        if (q < 0 || q >= preds.count || g < 0 || g >= static_cast<int>(gts.size()))
            throw std::invalid_argument("giou_loss_mean: pairing index out of range");
        query_ids.push_back(q);
        gt_min.push_back(gts[g].min());
        gt_max.push_back(gts[g].max());
        gt_half.push_back(gts[g].half);
    }
    const Tensor pc = ad::gather_rows(preds.center, query_ids);
    const Tensor ph = ad::gather_rows(preds.half, query_ids);
    const Tensor pmin = ad::sub(pc, ph);
    const Tensor pmax = ad::add(pc, ph);
    const Tensor bmin = const_rows3(gt_min);
    const Tensor bmax = const_rows3(gt_max);

    const Tensor inter_len = ad::relu(ad::sub(ad::min_elem(pmax, bmax), ad::max_elem(pmin, bmin)));
    const Tensor inter = prod_cols3(inter_len);
    const Tensor vol_pred = prod_cols3(ad::scale(ph, 2.0));
    const Tensor vol_gt = prod_cols3(ad::scale(const_rows3(gt_half), 2.0));
    const Tensor uni = ad::sub(ad::add(vol_pred, vol_gt), inter);
    const Tensor enclose = prod_cols3(ad::sub(ad::max_elem(pmax, bmax), ad::min_elem(pmin, bmin)));
    const Tensor iou = ad::div(inter, uni);
    const Tensor giou = ad::sub(iou, ad::div(ad::sub(enclose, uni), enclose));
    return ad::mean_all(ad::add_scalar(ad::scale(giou, -1.0), 1.0));
}

SceneForward forward_scene_loss(const model::ModeModel& model, const geom::PointSet& scene,
                                const PretrainConfig& cfg, std::uint64_t scene_seed) {
    SceneForward out;
    const Toggles& tg = cfg.toggles;

    // Dedicated streams per purpose: toggling augmentation never shifts the
    // block or mask draws.
    geom::PointSet scene_pts = scene;
    if (tg.scene_rotation_aug) {
        Rng aug = Rng::fork(derive_seed(scene_seed, 0, 1), 0);
        scene_pts = geom::rotate_about_up(scene_pts, aug.uniform(0.0, 2.0 * std::numbers::pi));
    }

    const blocks::BlockSet bs = blocks::sample_blocks(scene_pts, cfg.block, derive_seed(scene_seed, 0, 2));
    out.gt = blocks::gt_boxes(bs, cfg.box_center_mode);
    const int block_count = bs.count();

    std::vector<Tensor> block_tokens;
    std::vector<Tensor> patch_losses;
    if (tg.object_reconstruction) {
        block_tokens.reserve(block_count);
        for (int i = 0; i < block_count; ++i) {
            const geom::PointSet pts = bs.block_points(i);
            blocks::ObjectBlock ob =
                tg.coord_transform
                    ? blocks::to_object_space(pts, bs.center_point(i), derive_seed(scene_seed, 1, i),
                                              tg.block_rotation_aug, cfg.strict_normalize)
                    : blocks::ObjectBlock{pts, blocks::BlockTransform{}};
            const model::MaskPlan plan = model::plan_mask(model.object_config().patch_count,
                                                          model.object_config().mask_ratio,
                                                          derive_seed(scene_seed, 2, i));
            model::ModeModel::ObjectEncoding enc = model.object_encode(ob.points, plan);
            block_tokens.push_back(enc.tokens);

            if (!plan.masked.empty()) {
                const Tensor rec = model.object_decode_reconstruct(enc);
                const int k = model.object_config().patch_size;
                for (std::size_t j = 0; j < plan.masked.size(); ++j) {
                    const Tensor pred = ad::reshape(ad::slice_rows(rec, static_cast<int>(j), static_cast<int>(j) + 1),
                                                    {k, 3});
                    patch_losses.push_back(ad::chamfer_sq(pred, patch_constant(enc.patches.local_patches[plan.masked[j]])));
                }
            }
        }
    }

    out.cd = patch_losses.empty() ? Tensor::scalar(0.0) : ad::mean_all(ad::concat_rows(patch_losses));

    if (tg.scene_regression) {
        Tensor pooled = tg.joint_coupling
                            ? model.block_global_features(block_tokens, tg.stop_gradient)
                            : Tensor::zeros({block_count, model.scene_config().feature_dim});
        const Tensor scene_tokens = model.scene_encode_tokens(scene_pts);
        const Tensor enhanced = model.enhance_queries(pooled);
        const Tensor decoded = model.scene_decode(enhanced, scene_tokens);
        out.boxes = model.regress_boxes(decoded);
        out.pairing = match_predictions(out.boxes.to_boxes(), out.gt, cfg.matching);
        out.giou_loss = giou_loss_mean(out.boxes, out.gt, out.pairing);
    } else {
        out.giou_loss = Tensor::scalar(0.0);
    }

    out.total = ad::add(ad::scale(out.cd, cfg.weights.lambda1), ad::scale(out.giou_loss, cfg.weights.lambda2));
    return out;
}

double scheduled_lr(const PretrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps) {
    if (cfg.lr_schedule == "cosine" && total_steps > 0) {
        const double t = static_cast<double>(step) / static_cast<double>(total_steps);
        return cfg.opt.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(t, 1.0)));
    }
    return cfg.opt.lr;
}

std::uint64_t planned_steps(const PretrainConfig& cfg, std::size_t scene_count) {
    const std::uint64_t per_epoch =
        (scene_count + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);
    const std::uint64_t epoch_budget = static_cast<std::uint64_t>(cfg.epochs) * per_epoch;
    return cfg.max_steps > 0 ? static_cast<std::uint64_t>(cfg.max_steps) : epoch_budget;
}

StepStats pretrain_step(model::ModeModel& model, const std::vector<const geom::PointSet*>& batch,
                        const PretrainConfig& cfg, optim::AdamW& opt, std::uint64_t global_step,
                        std::uint64_t total_steps) {
    if (batch.empty()) throw std::invalid_argument("pretrain_step: empty batch");
    opt.zero_grad();

    std::vector<Tensor> totals;
    totals.reserve(batch.size());
    double cd_sum = 0.0, giou_sum = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const std::uint64_t scene_seed = derive_seed(cfg.seed, global_step, 100 + s);
        SceneForward fwd = forward_scene_loss(model, *batch[s], cfg, scene_seed);
        cd_sum += fwd.cd.scalar_value();
        giou_sum += fwd.giou_loss.scalar_value();
        totals.push_back(fwd.total);
    }
    const Tensor batch_loss = ad::scale(
        totals.size() == 1 ? totals[0] : ad::sum_all(ad::concat_rows(totals)), 1.0 / static_cast<double>(totals.size()));
    batch_loss.backward();

    StepStats stats;
    stats.loss_total = batch_loss.scalar_value();
    stats.loss_cd = cd_sum / static_cast<double>(batch.size());
    stats.loss_giou = giou_sum / static_cast<double>(batch.size());

    double total_sq = 0.0, object_sq = 0.0, scene_sq = 0.0;
    for (const model::NamedParam& p : model.parameters()) {
        double sq = 0.0;
        for (double g : p.tensor.grad()) sq += g * g;
        total_sq += sq;
        if (p.name.rfind("object.enc", 0) == 0 || p.name.rfind("object.embed", 0) == 0) object_sq += sq;
        if (p.name.rfind("scene.", 0) == 0) scene_sq += sq;
    }
    stats.grad_norm = std::sqrt(total_sq);
    stats.grad_norm_object_encoder = std::sqrt(object_sq);
    stats.grad_norm_scene = std::sqrt(scene_sq);

    opt.set_lr(scheduled_lr(cfg, global_step, total_steps));
    opt.step();
    return stats;
}

std::uint64_t pretrain_run(model::ModeModel& model, const std::vector<geom::PointSet>& scenes,
                           const PretrainConfig& cfg, optim::AdamW& opt, std::uint64_t start_step,
                           const RunHooks& hooks) {
    cfg.validate();
    if (scenes.empty()) throw std::invalid_argument("pretrain_run: empty dataset");

    const std::uint64_t total_steps = planned_steps(cfg, scenes.size());
    std::uint64_t global_step = 0;

    for (int epoch = 0; global_step < total_steps; ++epoch) {
        std::vector<int> order(scenes.size());
        for (std::size_t i = 0; i < scenes.size(); ++i) order[i] = static_cast<int>(i);
        Rng shuffle_rng = Rng::fork(cfg.seed, 0x65706f6368ull + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        for (std::size_t at = 0; at < order.size() && global_step < total_steps; at += cfg.batch_size) {
            if (global_step >= start_step) {
                std::vector<const geom::PointSet*> batch;
                for (std::size_t b = at; b < std::min(at + cfg.batch_size, order.size()); ++b)
                    batch.push_back(&scenes[order[b]]);
                const auto t0 = std::chrono::steady_clock::now();
                const StepStats stats = pretrain_step(model, batch, cfg, opt, global_step, total_steps);
                const double wall_ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                if (hooks.on_step) hooks.on_step(global_step, epoch, stats, wall_ms);
                if (cfg.checkpoint_every > 0 && (global_step + 1) % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0 &&
                    global_step + 1 < total_steps && hooks.on_checkpoint)
                    hooks.on_checkpoint(global_step + 1);
            }
            ++global_step;
        }
    }
    if (hooks.on_checkpoint) hooks.on_checkpoint(global_step);
    return global_step;
}

}  // namespace pointmode::pretrain
