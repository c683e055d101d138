/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pointmode/rng.hpp"

namespace pointmode::model {

using ad::Tensor;

void ObjectExpertConfig::validate() const {
    if (patch_count < 1 || patch_size < 1) throw std::invalid_argument("ObjectExpertConfig: patch layout must be positive");
    if (feature_dim < 1 || feature_dim % heads != 0)
        throw std::invalid_argument("ObjectExpertConfig: feature_dim must be a positive multiple of heads");
    if (mask_ratio < 0.0 || mask_ratio >= 1.0)
        throw std::invalid_argument("ObjectExpertConfig: mask_ratio must be in [0, 1)");
    if (encoder_layers < 1 || decoder_layers < 1)
        throw std::invalid_argument("ObjectExpertConfig: layer counts must be >= 1");
}

void SceneExpertConfig::validate() const {
    if (patch_count < 1 || patch_size < 1) throw std::invalid_argument("SceneExpertConfig: patch layout must be positive");
    if (feature_dim < 1 || feature_dim % heads != 0)
        throw std::invalid_argument("SceneExpertConfig: feature_dim must be a positive multiple of heads");
    if (encoder_layers < 1 || decoder_layers < 1)
        throw std::invalid_argument("SceneExpertConfig: layer counts must be >= 1");
    if (query_count < 1) throw std::invalid_argument("SceneExpertConfig: query_count must be >= 1");
}

MaskPlan plan_mask(int patch_count, double mask_ratio, std::uint64_t rng_seed) {
    if (mask_ratio < 0.0 || mask_ratio >= 1.0) throw std::invalid_argument("plan_mask: mask_ratio must be in [0, 1)");
    const int n_mask = static_cast<int>(std::floor(mask_ratio * patch_count + 0.5));
    Rng rng = Rng::fork(rng_seed, 0x6d61736bull);
    std::vector<int> masked = rng.sample_without_replacement(patch_count, n_mask);
    std::sort(masked.begin(), masked.end());
    std::vector<bool> is_masked(patch_count, false);
    for (int i : masked) is_masked[i] = true;
    MaskPlan plan;
    plan.masked = std::move(masked);
    for (int i = 0; i < patch_count; ++i) {
        if (!is_masked[i]) plan.unmasked.push_back(i);
    }
    return plan;
}

PatchSet patchify(const geom::PointSet& points, int m, int k, int seed_index) {
    const std::vector<int> centers = geom::fps(points, m, seed_index);
    PatchSet out;
    out.centers.reserve(m);
    out.local_patches.reserve(m);
    for (int c : centers) {
        const geom::Vec3 center = points[c];
        out.centers.push_back(center);
        std::vector<geom::Vec3> local;
        local.reserve(k);
        for (int idx : geom::knn(points, center, k)) local.push_back(points[idx] - center);
        out.local_patches.emplace_back(std::move(local));
    }
    return out;
}

const char* task_name(Task task) {
    switch (task) {
        case Task::kObjectClassify: return "object_classify";
        case Task::kObjectReconstruct: return "object_reconstruct";
        case Task::kSceneLocalize: return "scene_localize";
    }
    throw std::invalid_argument("task_name: unknown task");
}

Task task_from_name(const std::string& name) {
    if (name == "object_classify") return Task::kObjectClassify;
    if (name == "object_reconstruct") return Task::kObjectReconstruct;
    if (name == "scene_localize") return Task::kSceneLocalize;
    throw std::invalid_argument("task_from_name: unknown task '" + name + "'");
}

std::vector<geom::Box3D> PredBoxes::to_boxes() const {
    std::vector<geom::Box3D> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        out.push_back(geom::make_box({center.values()[i * 3], center.values()[i * 3 + 1], center.values()[i * 3 + 2]},
                                     {half.values()[i * 3], half.values()[i * 3 + 1], half.values()[i * 3 + 2]}));
    }
    return out;
}

namespace internal {

Tensor linear(const Linear& l, const Tensor& x) { return ad::add_rowvec(ad::matmul(x, l.w), l.b); }

Tensor layer_norm(const LayerNormP& ln, const Tensor& x) {
    return ad::add_rowvec(ad::mul_rowvec(ad::layer_norm_rows(x), ln.gamma), ln.beta);
}

Tensor attention(const Attention& a, const Tensor& queries, const Tensor& keys_values) {
    const int dim = a.q.w.cols();
    const int head_dim = dim / a.heads;
    const Tensor q = linear(a.q, queries);
    const Tensor k = linear(a.k, keys_values);
    const Tensor v = linear(a.v, keys_values);
    std::vector<Tensor> heads;
    heads.reserve(a.heads);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(head_dim));
    for (int h = 0; h < a.heads; ++h) {
        const Tensor qh = ad::slice_cols(q, h * head_dim, (h + 1) * head_dim);
        const Tensor kh = ad::slice_cols(k, h * head_dim, (h + 1) * head_dim);
        const Tensor vh = ad::slice_cols(v, h * head_dim, (h + 1) * head_dim);
        const Tensor scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt_d);
        heads.push_back(ad::matmul(ad::softmax_rows(scores), vh));
    }
    return linear(a.o, ad::concat_cols(heads));
}

Tensor feed_forward(const FeedForward& f, const Tensor& x) {
    return linear(f.fc2, ad::gelu(linear(f.fc1, x)));
}

Tensor encoder_layer(const EncoderLayer& l, const Tensor& x) {
    const Tensor normed = layer_norm(l.ln1, x);
    const Tensor after_attn = ad::add(x, attention(l.attn, normed, normed));
    return ad::add(after_attn, feed_forward(l.ff, layer_norm(l.ln2, after_attn)));
}

Tensor decoder_layer(const DecoderLayer& l, const Tensor& x, const Tensor& memory) {
    const Tensor normed = layer_norm(l.ln1, x);
    const Tensor after_self = ad::add(x, attention(l.self_attn, normed, normed));
    const Tensor after_cross = ad::add(after_self, attention(l.cross_attn, layer_norm(l.ln2, after_self), memory));
    return ad::add(after_cross, feed_forward(l.ff, layer_norm(l.ln3, after_cross)));
}

Tensor head(const Head& h, const Tensor& x) { return linear(h.fc2, ad::gelu(linear(h.fc1, x))); }

}  // namespace internal

using namespace internal;

ModeModel::ModeModel(SceneExpertConfig scene_cfg, ObjectExpertConfig object_cfg, int num_classes, std::uint64_t seed)
    : scene_cfg_(scene_cfg), object_cfg_(object_cfg), num_classes_(num_classes), seed_(seed) {
    scene_cfg_.validate();
    object_cfg_.validate();
    if (num_classes_ < 2) throw std::invalid_argument("ModeModel: need at least 2 classes");

    const int cs = scene_cfg_.feature_dim;
    const int co = object_cfg_.feature_dim;

    scene_embed_ = make_embedder("scene.embed", cs);
    for (int i = 0; i < scene_cfg_.encoder_layers; ++i)
        scene_encoder_.push_back(make_encoder_layer("scene.enc." + std::to_string(i), cs, scene_cfg_.heads));
    scene_encoder_ln_ = make_layer_norm("scene.enc.final_ln", cs);
    for (int i = 0; i < scene_cfg_.decoder_layers; ++i)
        scene_decoder_.push_back(make_decoder_layer("scene.dec." + std::to_string(i), cs, scene_cfg_.heads));
    scene_decoder_ln_ = make_layer_norm("scene.dec.final_ln", cs);

    object_embed_ = make_embedder("object.embed", co);
    for (int i = 0; i < object_cfg_.encoder_layers; ++i)
        object_encoder_.push_back(make_encoder_layer("object.enc." + std::to_string(i), co, object_cfg_.heads));
    object_encoder_ln_ = make_layer_norm("object.enc.final_ln", co);
    for (int i = 0; i < object_cfg_.decoder_layers; ++i)
        object_decoder_.push_back(make_encoder_layer("object.dec." + std::to_string(i), co, object_cfg_.heads));
    object_decoder_ln_ = make_layer_norm("object.dec.final_ln", co);
    mask_token_ = make_param("object.mask_token", {1, co}, 0.02);

    projection_ = make_linear("project", co, cs);
    queries_ = make_param("queries", {scene_cfg_.query_count, cs}, 0.02);
    box_head_ = make_head("box_head", cs, cs, 6);
    reconstruction_head_ = make_head("rec_head", co, co, object_cfg_.patch_size * 3);
    classification_head_ = make_head("cls_head", 2 * co, co, num_classes_);
}

Tensor ModeModel::make_param(const std::string& name, ad::Shape shape, double stddev) {
    Rng rng = Rng::fork(seed_, 0x706172616dull + init_stream_++);
    std::vector<double> values(static_cast<std::size_t>(ad::shape_size(shape)));
    for (double& v : values) v = stddev == 0.0 ? 0.0 : rng.normal(0.0, stddev);
    Tensor t = Tensor::from_values(shape, std::move(values), true);
    t.set_name(name);
    params_.push_back({name, t});
    return t;
}

Linear ModeModel::make_linear(const std::string& name, int in, int out) {
    Linear l;
    l.w = make_param(name + ".w", {in, out}, std::sqrt(2.0 / (in + out)));
    l.b = make_param(name + ".b", {1, out}, 0.0);
    return l;
}

LayerNormP ModeModel::make_layer_norm(const std::string& name, int dim) {
    LayerNormP ln;
    ln.gamma = Tensor::from_values({1, dim}, std::vector<double>(dim, 1.0), true);
    ln.gamma.set_name(name + ".gamma");
    params_.push_back({name + ".gamma", ln.gamma});
    ln.beta = make_param(name + ".beta", {1, dim}, 0.0);
    return ln;
}

Attention ModeModel::make_attention(const std::string& name, int dim, int heads) {
    Attention a;
    a.q = make_linear(name + ".wq", dim, dim);
    a.k = make_linear(name + ".wk", dim, dim);
    a.v = make_linear(name + ".wv", dim, dim);
    a.o = make_linear(name + ".wo", dim, dim);
    a.heads = heads;
    return a;
}

FeedForward ModeModel::make_feed_forward(const std::string& name, int dim) {
    FeedForward f;
    f.fc1 = make_linear(name + ".fc1", dim, 4 * dim);
    f.fc2 = make_linear(name + ".fc2", 4 * dim, dim);
    return f;
}

EncoderLayer ModeModel::make_encoder_layer(const std::string& name, int dim, int heads) {
    EncoderLayer l;
    l.ln1 = make_layer_norm(name + ".ln1", dim);
    l.attn = make_attention(name + ".attn", dim, heads);
    l.ln2 = make_layer_norm(name + ".ln2", dim);
    l.ff = make_feed_forward(name + ".ff", dim);
    return l;
}

DecoderLayer ModeModel::make_decoder_layer(const std::string& name, int dim, int heads) {
    DecoderLayer l;
    l.ln1 = make_layer_norm(name + ".ln1", dim);
    l.self_attn = make_attention(name + ".self", dim, heads);
    l.ln2 = make_layer_norm(name + ".ln2", dim);
    l.cross_attn = make_attention(name + ".cross", dim, heads);
    l.ln3 = make_layer_norm(name + ".ln3", dim);
    l.ff = make_feed_forward(name + ".ff", dim);
    return l;
}

Embedder ModeModel::make_embedder(const std::string& name, int dim) {
    Embedder e;
    e.point_net.fc1 = make_linear(name + ".point.fc1", 3, dim);
    e.point_net.fc2 = make_linear(name + ".point.fc2", dim, dim);
    e.pos_net.fc1 = make_linear(name + ".pos.fc1", 3, dim);
    e.pos_net.fc2 = make_linear(name + ".pos.fc2", dim, dim);
    return e;
}

Head ModeModel::make_head(const std::string& name, int in, int hidden, int out) {
    Head h;
    h.fc1 = make_linear(name + ".fc1", in, hidden);
    h.fc2 = make_linear(name + ".fc2", hidden, out);
    return h;
}

std::vector<Tensor> ModeModel::parameter_tensors() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const NamedParam& p : params_) out.push_back(p.tensor);
    return out;
}

Tensor ModeModel::parameter(const std::string& name) const {
    for (const NamedParam& p : params_) {
        if (p.name == name) return p.tensor;
    }
    throw std::invalid_argument("ModeModel: no parameter named '" + name + "'");
}

namespace {

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

std::vector<NamedParam> ModeModel::active_parameters(Task task) const {
    std::vector<std::string> prefixes;
    switch (task) {
        case Task::kObjectClassify:
            prefixes = {"object.embed.", "object.enc.", "cls_head."};
            break;
        case Task::kObjectReconstruct:
            prefixes = {"object.embed.", "object.enc.", "object.dec.", "object.mask_token", "rec_head."};
            break;
        case Task::kSceneLocalize:
            prefixes = {"scene.", "object.embed.", "object.enc.", "project.", "queries", "box_head."};
            break;
    }
    std::vector<NamedParam> out;
    for (const NamedParam& p : params_) {
        for (const std::string& prefix : prefixes) {
            if (starts_with(p.name, prefix)) {
                out.push_back(p);
                break;
            }
        }
    }
    return out;
}

void ModeModel::load_parameter_values(const std::map<std::string, std::vector<double>>& values) {
    if (values.size() != params_.size())
        throw std::invalid_argument("ModeModel: checkpoint has " + std::to_string(values.size()) +
                                    " tensors, model has " + std::to_string(params_.size()));
    for (NamedParam& p : params_) {
        auto it = values.find(p.name);
        if (it == values.end()) throw std::invalid_argument("ModeModel: checkpoint missing tensor '" + p.name + "'");
        if (it->second.size() != p.tensor.values().size())
            throw std::invalid_argument("ModeModel: size mismatch for tensor '" + p.name + "'");
        p.tensor.values() = it->second;
    }
}

Tensor ModeModel::embed_patches(const Embedder& emb, const PatchSet& patches,
                                const std::vector<int>& patch_ids) const {
    if (patch_ids.empty()) throw std::invalid_argument("embed_patches: no patches selected");
    const int k = static_cast<int>(patches.local_patches[0].size());
    std::vector<double> flat;
    flat.reserve(patch_ids.size() * static_cast<std::size_t>(k) * 3);
    std::vector<double> centers;
    centers.reserve(patch_ids.size() * 3);
    for (int id : patch_ids) {
        for (const geom::Vec3& p : patches.local_patches[id]) {
            flat.insert(flat.end(), p.begin(), p.end());
        }
        const geom::Vec3& c = patches.centers[id];
        centers.insert(centers.end(), c.begin(), c.end());
    }
    const int n_sel = static_cast<int>(patch_ids.size());
    const Tensor pts = Tensor::from_values({n_sel * k, 3}, std::move(flat));
    const Tensor per_point = linear(emb.point_net.fc2, ad::gelu(linear(emb.point_net.fc1, pts)));
    std::vector<Tensor> pooled;
    pooled.reserve(n_sel);
    for (int i = 0; i < n_sel; ++i)
        pooled.push_back(ad::reduce_max_rows(ad::slice_rows(per_point, i * k, (i + 1) * k)));
    const Tensor tokens = ad::concat_rows(pooled);
    const Tensor center_t = Tensor::from_values({n_sel, 3}, std::move(centers));
    const Tensor pos = linear(emb.pos_net.fc2, ad::gelu(linear(emb.pos_net.fc1, center_t)));
    return ad::add(tokens, pos);
}

ModeModel::ObjectEncoding ModeModel::object_encode(const geom::PointSet& block_points, const MaskPlan& plan) const {
    if (plan.total() != object_cfg_.patch_count)
        throw std::invalid_argument("object_encode: mask plan covers " + std::to_string(plan.total()) +
                                    " patches, expected " + std::to_string(object_cfg_.patch_count));
    ObjectEncoding enc;
    enc.patches = patchify(block_points, object_cfg_.patch_count, object_cfg_.patch_size);
    enc.plan = plan;
    Tensor x = embed_patches(object_embed_, enc.patches, plan.unmasked);
    for (const EncoderLayer& l : object_encoder_) x = encoder_layer(l, x);
    enc.tokens = layer_norm(object_encoder_ln_, x);
    return enc;
}

Tensor ModeModel::object_decode_reconstruct(const ObjectEncoding& enc) const {
    const int n_mask = static_cast<int>(enc.plan.masked.size());
    if (n_mask == 0) return Tensor{};  // empty reconstruction; callers treat the loss as 0
    // Mask tokens: one shared learned vector plus the positional encoding of
    // each masked patch center.
    std::vector<double> centers;
    centers.reserve(static_cast<std::size_t>(n_mask) * 3);
    for (int id : enc.plan.masked) {
        const geom::Vec3& c = enc.patches.centers[id];
        centers.insert(centers.end(), c.begin(), c.end());
    }
    const Tensor center_t = Tensor::from_values({n_mask, 3}, std::move(centers));
    const Tensor pos = linear(object_embed_.pos_net.fc2, ad::gelu(linear(object_embed_.pos_net.fc1, center_t)));
    const Tensor mask_tokens = ad::add(ad::gather_rows(mask_token_, std::vector<int>(n_mask, 0)), pos);

    Tensor x = ad::concat_rows({enc.tokens, mask_tokens});
    for (const EncoderLayer& l : object_decoder_) x = encoder_layer(l, x);
    x = layer_norm(object_decoder_ln_, x);
    const int visible = static_cast<int>(enc.plan.unmasked.size());
    const Tensor masked_features = ad::slice_rows(x, visible, visible + n_mask);
    return head(reconstruction_head_, masked_features);  // n_mask x (patch_size*3)
}

Tensor ModeModel::scene_encode_tokens(const geom::PointSet& scene) const {
    const PatchSet patches = patchify(scene, scene_cfg_.patch_count, scene_cfg_.patch_size);
    std::vector<int> all_ids(scene_cfg_.patch_count);
    for (int i = 0; i < scene_cfg_.patch_count; ++i) all_ids[i] = i;
    Tensor x = embed_patches(scene_embed_, patches, all_ids);
    for (const EncoderLayer& l : scene_encoder_) x = encoder_layer(l, x);
    return layer_norm(scene_encoder_ln_, x);
}

Tensor ModeModel::block_global_features(const std::vector<Tensor>& block_tokens, bool barrier) const {
    if (block_tokens.empty()) throw std::invalid_argument("block_global_features: no blocks");
    std::vector<Tensor> pooled;
    pooled.reserve(block_tokens.size());
    for (const Tensor& tokens : block_tokens) {
        if (tokens.rows() < 1) throw std::invalid_argument("block_global_features: empty token sequence");
        pooled.push_back(ad::reduce_max_rows(tokens));
    }
    Tensor stacked = ad::concat_rows(pooled);
    if (barrier) stacked = ad::stop_gradient(stacked);
    return linear(projection_, stacked);
}

Tensor ModeModel::enhance_queries(const ad::Tensor& pooled_features) const {
    const int block_count = pooled_features.rows();
    std::vector<int> tile(scene_cfg_.query_count);
    for (int j = 0; j < scene_cfg_.query_count; ++j) tile[j] = j % block_count;
    return ad::add(queries_, ad::gather_rows(pooled_features, tile));
}

Tensor ModeModel::scene_decode(const Tensor& queries, const Tensor& scene_tokens) const {
    Tensor x = queries;
    for (const DecoderLayer& l : scene_decoder_) x = decoder_layer(l, x, scene_tokens);
    return layer_norm(scene_decoder_ln_, x);
}

PredBoxes ModeModel::regress_boxes(const Tensor& decoded_queries) const {
    const Tensor raw = head(box_head_, decoded_queries);  // q x 6
    PredBoxes out;
    out.center = ad::slice_cols(raw, 0, 3);
    out.half = ad::softplus(ad::slice_cols(raw, 3, 6));
    out.count = decoded_queries.rows();
    return out;
}

Tensor ModeModel::classify_logits(const geom::PointSet& shape) const {
    MaskPlan no_mask;
    for (int i = 0; i < object_cfg_.patch_count; ++i) no_mask.unmasked.push_back(i);
    const ObjectEncoding enc = object_encode(shape, no_mask);
    const Tensor pooled = ad::concat_cols({ad::reduce_max_rows(enc.tokens), ad::reduce_mean_rows(enc.tokens)});
    return head(classification_head_, pooled);
}

std::string ModeModel::architecture_fingerprint() const {
    return "scene(c" + std::to_string(scene_cfg_.feature_dim) + ".m" + std::to_string(scene_cfg_.patch_count) + ".p" +
           std::to_string(scene_cfg_.patch_size) + ".e" + std::to_string(scene_cfg_.encoder_layers) + ".d" +
           std::to_string(scene_cfg_.decoder_layers) + ".q" + std::to_string(scene_cfg_.query_count) + ".h" +
           std::to_string(scene_cfg_.heads) + ")_object(c" + std::to_string(object_cfg_.feature_dim) + ".m" +
           std::to_string(object_cfg_.patch_count) + ".p" + std::to_string(object_cfg_.patch_size) + ".e" +
           std::to_string(object_cfg_.encoder_layers) + ".d" + std::to_string(object_cfg_.decoder_layers) + ".h" +
           std::to_string(object_cfg_.heads) + ")_cls" + std::to_string(num_classes_);
}

}  // namespace pointmode::model
