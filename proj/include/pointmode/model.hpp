/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pointmode/autodiff.hpp"
#include "pointmode/blocks.hpp"
#include "pointmode/geom.hpp"

namespace pointmode::model {

struct ObjectExpertConfig {
    int patch_count = 16;    // patches per block
    int patch_size = 16;     // points per patch
    int feature_dim = 64;
    int encoder_layers = 3;
    int decoder_layers = 2;
    int heads = 4;
    double mask_ratio = 0.6;
    void validate() const;
};

struct SceneExpertConfig {
    int patch_count = 64;  // scene patches
    int patch_size = 16;
    int feature_dim = 64;
    int encoder_layers = 3;
    int decoder_layers = 8;
    int query_count = 8;
    int heads = 4;
    void validate() const;
};

// Disjoint index partition of 0..patch_count, both halves sorted ascending.
struct MaskPlan {
    std::vector<int> masked;
    std::vector<int> unmasked;
    int total() const { return static_cast<int>(masked.size() + unmasked.size()); }
};

// round-half-up(mask_ratio * patch_count) indices drawn uniformly without
// replacement; deterministic given seed.
MaskPlan plan_mask(int patch_count, double mask_ratio, std::uint64_t rng_seed);

// Farthest-point-sampled patch centers with k-NN membership; patch points are
// stored relative to their center.
struct PatchSet {
    std::vector<geom::Vec3> centers;
    std::vector<geom::PointSet> local_patches;
    int count() const { return static_cast<int>(centers.size()); }
};
PatchSet patchify(const geom::PointSet& points, int m, int k, int seed_index = 0);

struct NamedParam {
    std::string name;
    ad::Tensor tensor;
};

enum class Task { kObjectClassify, kObjectReconstruct, kSceneLocalize };
const char* task_name(Task task);
Task task_from_name(const std::string& name);

// Predicted axis-aligned boxes, one per decoder query. Half extents pass
// through softplus and are therefore strictly positive.
struct PredBoxes {
    ad::Tensor center;  // q x 3
    ad::Tensor half;    // q x 3
    int count = 0;
    std::vector<geom::Box3D> to_boxes() const;
};

namespace internal {

struct Linear {
    ad::Tensor w, b;
};
struct LayerNormP {
    ad::Tensor gamma, beta;
};
struct Attention {
    Linear q, k, v, o;
    int heads = 1;
};
struct FeedForward {
    Linear fc1, fc2;
};
struct EncoderLayer {
    LayerNormP ln1, ln2;
    Attention attn;
    FeedForward ff;
};
struct DecoderLayer {
    LayerNormP ln1, ln2, ln3;
    Attention self_attn, cross_attn;
    FeedForward ff;
};
struct PointMlp {
    Linear fc1, fc2;
};
struct Embedder {
    PointMlp point_net;  // shared per-point map, max-pooled per patch
    PointMlp pos_net;    // positional encoding of patch centers
};
struct Head {
    Linear fc1, fc2;
};

ad::Tensor linear(const Linear& l, const ad::Tensor& x);
ad::Tensor layer_norm(const LayerNormP& ln, const ad::Tensor& x);
ad::Tensor attention(const Attention& a, const ad::Tensor& queries, const ad::Tensor& keys_values);
ad::Tensor encoder_layer(const EncoderLayer& l, const ad::Tensor& x);
ad::Tensor decoder_layer(const DecoderLayer& l, const ad::Tensor& x, const ad::Tensor& memory);
ad::Tensor head(const Head& h, const ad::Tensor& x);

}  // namespace internal

// The mixture-of-domain-experts model: a scene expert (encoder + query
// decoder) and one shared object expert (masked encoder + reconstruction
// decoder), joined by a projection of pooled block features into query space.
class ModeModel {
public:
    ModeModel(SceneExpertConfig scene_cfg, ObjectExpertConfig object_cfg, int num_classes, std::uint64_t seed);

    const SceneExpertConfig& scene_config() const { return scene_cfg_; }
    const ObjectExpertConfig& object_config() const { return object_cfg_; }
    int num_classes() const { return num_classes_; }

    const std::vector<NamedParam>& parameters() const { return params_; }
    std::vector<ad::Tensor> parameter_tensors() const;
    // Submodules relevant to a task; object tasks never include scene
    // parameters and vice versa for heads.
    std::vector<NamedParam> active_parameters(Task task) const;
    ad::Tensor parameter(const std::string& name) const;
    void load_parameter_values(const std::map<std::string, std::vector<double>>& values);

    struct ObjectEncoding {
        ad::Tensor tokens;  // |unmasked| x feature_dim
        PatchSet patches;
        MaskPlan plan;
    };
    // patchify -> embed unmasked patches -> encoder stack.
    ObjectEncoding object_encode(const geom::PointSet& block_points, const MaskPlan& plan) const;
    // Visible tokens + positioned mask tokens through the decoder stack, then
    // the reconstruction head: one local patch (patch_size x 3) per masked slot.
    ad::Tensor object_decode_reconstruct(const ObjectEncoding& enc) const;

    ad::Tensor scene_encode_tokens(const geom::PointSet& scene) const;  // patch_count x feature_dim

    // Componentwise max over one block's unmasked tokens -> projection input.
    // With barrier, gradients stop before the projection so nothing reaches
    // the object encoder from downstream losses.
    ad::Tensor block_global_features(const std::vector<ad::Tensor>& block_tokens, bool barrier) const;

    // queries[j] + pooled_features[j mod block_count]; the same tiling rule
    // pairs query j with ground-truth box j mod block_count downstream.
    ad::Tensor enhance_queries(const ad::Tensor& pooled_features) const;

    ad::Tensor scene_decode(const ad::Tensor& queries, const ad::Tensor& scene_tokens) const;
    PredBoxes regress_boxes(const ad::Tensor& decoded_queries) const;

    ad::Tensor classify_logits(const geom::PointSet& shape) const;  // 1 x num_classes

    std::string architecture_fingerprint() const;

private:
    ad::Tensor make_param(const std::string& name, ad::Shape shape, double stddev);
    internal::Linear make_linear(const std::string& name, int in, int out);
    internal::LayerNormP make_layer_norm(const std::string& name, int dim);
    internal::Attention make_attention(const std::string& name, int dim, int heads);
    internal::FeedForward make_feed_forward(const std::string& name, int dim);
    internal::EncoderLayer make_encoder_layer(const std::string& name, int dim, int heads);
    internal::DecoderLayer make_decoder_layer(const std::string& name, int dim, int heads);
    internal::Embedder make_embedder(const std::string& name, int dim);
    internal::Head make_head(const std::string& name, int in, int hidden, int out);

    ad::Tensor embed_patches(const internal::Embedder& emb, const PatchSet& patches,
                             const std::vector<int>& patch_ids) const;

    SceneExpertConfig scene_cfg_;
    ObjectExpertConfig object_cfg_;
    int num_classes_;

    internal::Embedder scene_embed_;
    std::vector<internal::EncoderLayer> scene_encoder_;
    internal::LayerNormP scene_encoder_ln_;
    std::vector<internal::DecoderLayer> scene_decoder_;
    internal::LayerNormP scene_decoder_ln_;

    internal::Embedder object_embed_;
    std::vector<internal::EncoderLayer> object_encoder_;
    internal::LayerNormP object_encoder_ln_;
    std::vector<internal::EncoderLayer> object_decoder_;  // self-attention blocks over visible + mask tokens
    internal::LayerNormP object_decoder_ln_;
    ad::Tensor mask_token_;

    internal::Linear projection_;
    ad::Tensor queries_;
    internal::Head box_head_;
    internal::Head reconstruction_head_;
    internal::Head classification_head_;

    std::vector<NamedParam> params_;
    mutable std::uint64_t init_stream_ = 0;
    std::uint64_t seed_ = 0;
};

}  // namespace pointmode::model
