/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pointmode/blocks.hpp"
#include "pointmode/matching.hpp"
#include "pointmode/model.hpp"
#include "pointmode/optim.hpp"

namespace pointmode::pretrain {

struct LossWeights {
    double lambda1 = 1.0;  // masked-reconstruction term
    double lambda2 = 1.0;  // box-regression term
};

struct Toggles {
    bool scene_regression = true;
    bool object_reconstruction = true;
    bool coord_transform = true;
    bool joint_coupling = true;
    bool stop_gradient = true;
    bool scene_rotation_aug = true;
    bool block_rotation_aug = true;
};

struct PretrainConfig {
    blocks::BlockConfig block;
    LossWeights weights;
    optim::AdamWConfig opt;
    int epochs = 10;
    int max_steps = 0;  // 0: run the full epoch budget
    int batch_size = 1;
    Toggles toggles;
    MatchMode matching = MatchMode::kAssigned;
    std::string lr_schedule = "constant";  // "constant" | "cosine"
    std::uint64_t seed = 1;
    int checkpoint_every = 0;  // 0: final checkpoint only
    bool strict_normalize = false;
    geom::CenterMode box_center_mode = geom::CenterMode::kMean;

    void validate() const;
};

// One scene through the joint pipeline. cd and giou_loss are scalar graph
// tensors (constants 0 when their pipeline is toggled off); total is their
// weighted sum.
struct SceneForward {
    ad::Tensor total;
    ad::Tensor cd;
    ad::Tensor giou_loss;
    std::vector<geom::Box3D> gt;
    model::PredBoxes boxes;  // populated only when scene regression runs
    Pairing pairing;
};

SceneForward forward_scene_loss(const model::ModeModel& model, const geom::PointSet& scene,
                                const PretrainConfig& cfg, std::uint64_t scene_seed);

// Differentiable mean over pairs of (1 - GIoU); prediction half extents must
// be strictly positive (the box head guarantees this).
ad::Tensor giou_loss_mean(const model::PredBoxes& preds, const std::vector<geom::Box3D>& gts, const Pairing& pairing);

struct StepStats {
    double loss_total = 0.0;
    double loss_cd = 0.0;
    double loss_giou = 0.0;
    double grad_norm = 0.0;
    double grad_norm_object_encoder = 0.0;
    double grad_norm_scene = 0.0;
};

// sample blocks -> object mask/encode/decode -> pooled features -> scene
// encode/decode/regress -> joint loss -> backward -> optimizer step.
// total_steps feeds the lr schedule; 0 means constant.
StepStats pretrain_step(model::ModeModel& model, const std::vector<const geom::PointSet*>& batch,
                        const PretrainConfig& cfg, optim::AdamW& opt, std::uint64_t global_step,
                        std::uint64_t total_steps = 0);

double scheduled_lr(const PretrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps);
std::uint64_t planned_steps(const PretrainConfig& cfg, std::size_t scene_count);

// Deterministic per-(run, step, slot) seed; all pretraining randomness is
// derived statelessly from these so a resumed run replays the exact stream.
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t step, std::uint64_t slot);

struct RunHooks {
    std::function<void(std::uint64_t step, int epoch, const StepStats& stats, double wall_ms)> on_step;
    std::function<void(std::uint64_t completed_steps)> on_checkpoint;
};

// Epoch loop over the scene list. Steps before start_step are skipped without
// compute, which together with stateless seeding makes resumption exact.
// Returns the number of completed steps.
std::uint64_t pretrain_run(model::ModeModel& model, const std::vector<geom::PointSet>& scenes,
                           const PretrainConfig& cfg, optim::AdamW& opt, std::uint64_t start_step,
                           const RunHooks& hooks);

}  // namespace pointmode::pretrain
