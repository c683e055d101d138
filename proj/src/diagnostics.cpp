/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/diagnostics.hpp"

#include <cmath>
#include <functional>

#include "pointmode/autodiff.hpp"
#include "pointmode/optim.hpp"
#include "pointmode/pretrain.hpp"
#include "pointmode/rng.hpp"

namespace pointmode::diag {

using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, Rng& rng, bool requires_grad = true, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(ad::shape_size(shape)));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

// Contract the op output against fixed random weights so the check covers
// every output component.
Tensor contract(const Tensor& t, Rng rng) {
    std::vector<double> w(static_cast<std::size_t>(t.size()));
    for (double& x : w) x = rng.uniform(-1.0, 1.0);
    return ad::sum_all(ad::mul(ad::reshape(t, {static_cast<int>(t.size())}),
                               Tensor::from_values({static_cast<int>(t.size())}, std::move(w))));
}

struct Case {
    const char* name;
    std::function<double(std::uint64_t seed, double step)> run;  // returns max rel error
};

double check_unary(std::uint64_t seed, double step, const std::function<Tensor(const Tensor&)>& op, double lo = -1.0,
                   double hi = 1.0) {
    Rng rng(seed);
    Tensor x = random_tensor({3, 5}, rng, true, lo, hi);
    Rng wrng(seed ^ 0xabcdefull);
    return optim::grad_check([&] { return contract(op(x), wrng.fork(1)); }, x, step);
}

double check_binary(std::uint64_t seed, double step, const std::function<Tensor(const Tensor&, const Tensor&)>& op) {
    Rng rng(seed);
    Tensor a = random_tensor({3, 5}, rng);
    Tensor b = random_tensor({3, 5}, rng);
    Rng wrng(seed ^ 0xabcdefull);
    return optim::grad_check([&] { return contract(op(a, b), wrng.fork(1)); }, {a, b}, step);
}

}  // namespace

std::vector<GradCheckResult> run_primitive_grad_checks(int seeds, double tolerance, double step) {
    std::vector<Case> cases;

    cases.push_back({"add", [](std::uint64_t s, double h) { return check_binary(s, h, ad::add); }});
    cases.push_back({"sub", [](std::uint64_t s, double h) { return check_binary(s, h, ad::sub); }});
    cases.push_back({"mul", [](std::uint64_t s, double h) { return check_binary(s, h, ad::mul); }});
    cases.push_back({"div", [](std::uint64_t s, double h) {
        Rng rng(s);
        Tensor a = random_tensor({3, 5}, rng);
        std::vector<double> bv(15);
        for (double& x : bv) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 2.0);
        Tensor b = Tensor::from_values({3, 5}, std::move(bv), true);
        Rng wrng(s ^ 0xabcdefull);
        return optim::grad_check([&] { return contract(ad::div(a, b), wrng.fork(1)); }, {a, b}, h);
    }});
    cases.push_back({"min_elem", [](std::uint64_t s, double h) { return check_binary(s, h, ad::min_elem); }});
    cases.push_back({"max_elem", [](std::uint64_t s, double h) { return check_binary(s, h, ad::max_elem); }});
    cases.push_back({"add_rowvec", [](std::uint64_t s, double h) {
        Rng rng(s);
        Tensor a = random_tensor({4, 3}, rng);
        Tensor v = random_tensor({1, 3}, rng);
        Rng wrng(s ^ 0xabcdefull);
        return optim::grad_check([&] { return contract(ad::add_rowvec(a, v), wrng.fork(1)); }, {a, v}, h);
    }});
    cases.push_back({"mul_rowvec", [](std::uint64_t s, double h) {
        Rng rng(s);
        Tensor a = random_tensor({4, 3}, rng);
        Tensor v = random_tensor({1, 3}, rng);
        Rng wrng(s ^ 0xabcdefull);
        return optim::grad_check([&] { return contract(ad::mul_rowvec(a, v), wrng.fork(1)); }, {a, v}, h);
    }});
    cases.push_back({"scale", [](std::uint64_t s, double h) {
        return check_unary(s, h, [](const Tensor& x) { return ad::scale(x, 1.7); });
    }});
    cases.push_back({"add_scalar", [](std::uint64_t s, double h) {
        return check_unary(s, h, [](const Tensor& x) { return ad::add_scalar(x, -0.3); });
    }});
    cases.push_back({"matmul", [](std::uint64_t s, double h) {
        Rng rng(s);
        Tensor a = random_tensor({3, 4}, rng);
        Tensor b = random_tensor({4, 2}, rng);
        Rng wrng(s ^ 0xabcdefull);
        return optim::grad_check([&] { return contract(ad::matmul(a, b), wrng.fork(1)); }, {a, b}, h);
    }});
    cases.push_back({"transpose", [](std::uint64_t s, double h) { return check_unary(s, h, ad::transpose); }});
    cases.push_back({"concat_rows", [](std::uint64_t s, double h) {
        Rng rng(s);
        Tensor a = random_tensor({2, 3}, rng);
        Tensor b = random_tensor({4, 3}, rng);
        Rng wrng(s ^ 0xabcdefull);
        return optim::grad_check([&] { return contract(ad::concat_rows({a, b}), wrng.fork(1)); }, {a, b}, h);
    }});
    cases.push_back({"concat_cols", [](std::uint64_t s, double h) {
        Rng rng(s);
        Tensor a = random_tensor({3, 2}, rng);
        Tensor b = random_tensor({3, 4}, rng);
        Rng wrng(s ^ 0xabcdefull);
        return optim::grad_check([&] { return contract(ad::concat_cols({a, b}), wrng.fork(1)); }, {a, b}, h);
    }});
    cases.push_back({"slice_rows", [](std::uint64_t s, double h) {
        return check_unary(s, h, [](const Tensor& x) { return ad::slice_rows(x, 1, 3); });
    }});
    cases.push_back({"slice_cols", [](std::uint64_t s, double h) {
        return check_unary(s, h, [](const Tensor& x) { return ad::slice_cols(x, 1, 4); });
    }});
    cases.push_back({"gather_rows", [](std::uint64_t s, double h) {
        return check_unary(s, h, [](const Tensor& x) { return ad::gather_rows(x, {2, 0, 2, 1}); });
    }});
    cases.push_back({"reshape", [](std::uint64_t s, double h) {
        return check_unary(s, h, [](const Tensor& x) { return ad::reshape(x, {5, 3}); });
    }});
    cases.push_back({"sum_all", [](std::uint64_t s, double h) {
        Rng rng(s);
        Tensor x = random_tensor({3, 5}, rng);
        return optim::grad_check([&] { return ad::sum_all(x); }, x, h);
    }});
    cases.push_back({"mean_all", [](std::uint64_t s, double h) {
        Rng rng(s);
        Tensor x = random_tensor({3, 5}, rng);
        return optim::grad_check([&] { return ad::mean_all(x); }, x, h);
    }});
    cases.push_back({"reduce_max_rows", [](std::uint64_t s, double h) { return check_unary(s, h, ad::reduce_max_rows); }});
    cases.push_back({"reduce_mean_rows", [](std::uint64_t s, double h) { return check_unary(s, h, ad::reduce_mean_rows); }});
    cases.push_back({"softmax_rows", [](std::uint64_t s, double h) { return check_unary(s, h, ad::softmax_rows); }});
    cases.push_back({"layer_norm_rows", [](std::uint64_t s, double h) {
        return check_unary(s, h, [](const Tensor& x) { return ad::layer_norm_rows(x); });
    }});
    cases.push_back({"gelu", [](std::uint64_t s, double h) { return check_unary(s, h, ad::gelu, -2.0, 2.0); }});
    cases.push_back({"relu", [](std::uint64_t s, double h) { return check_unary(s, h, ad::relu, -2.0, 2.0); }});
    cases.push_back({"softplus", [](std::uint64_t s, double h) { return check_unary(s, h, ad::softplus, -3.0, 3.0); }});
    cases.push_back({"chamfer_sq", [](std::uint64_t s, double h) {
        Rng rng(s);
        Tensor a = random_tensor({5, 3}, rng);
        Tensor b = random_tensor({7, 3}, rng);
        return optim::grad_check([&] { return ad::chamfer_sq(a, b); }, {a, b}, h);
    }});
    cases.push_back({"cross_entropy", [](std::uint64_t s, double h) {
        Rng rng(s);
        Tensor logits = random_tensor({4, 3}, rng, true, -2.0, 2.0);
        const std::vector<int> labels = {0, 2, 1, 2};
        return optim::grad_check([&] { return ad::cross_entropy(logits, labels); }, logits, h);
    }});

    std::vector<GradCheckResult> results;
    results.reserve(cases.size());
    for (const Case& c : cases) {
        double worst = 0.0;
        for (int s = 0; s < seeds; ++s) worst = std::max(worst, c.run(1000 + 17 * s, step));
        results.push_back({c.name, worst, worst < tolerance});
    }
    return results;
}

GradCheckResult run_end_to_end_grad_check(double tolerance, double step) {
    model::SceneExpertConfig scene_cfg;
    scene_cfg.patch_count = 4;
    scene_cfg.patch_size = 4;
    scene_cfg.feature_dim = 8;
    scene_cfg.encoder_layers = 1;
    scene_cfg.decoder_layers = 1;
    scene_cfg.query_count = 2;
    scene_cfg.heads = 2;
    model::ObjectExpertConfig object_cfg;
    object_cfg.patch_count = 4;
    object_cfg.patch_size = 4;
    object_cfg.feature_dim = 8;
    object_cfg.encoder_layers = 1;
    object_cfg.decoder_layers = 1;
    object_cfg.heads = 2;
    object_cfg.mask_ratio = 0.5;
    model::ModeModel model(scene_cfg, object_cfg, 2, 42);

    Rng rng(7);
    std::vector<geom::Vec3> pts;
    for (int i = 0; i < 48; ++i)
        pts.push_back({rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(0.0, 1.0)});
    const geom::PointSet scene(std::move(pts));

    pretrain::PretrainConfig cfg;
    cfg.block.block_count = 2;
    cfg.block.block_points = 12;
    cfg.toggles.stop_gradient = false;  // check the full differentiable path
    cfg.toggles.scene_rotation_aug = false;
    cfg.toggles.block_rotation_aug = false;
    cfg.seed = 11;

    std::vector<ad::Tensor> wrt = model.parameter_tensors();
    const double err = optim::grad_check(
        [&] { return pretrain::forward_scene_loss(model, scene, cfg, 555).total; }, wrt, step);
    return {"joint_loss_end_to_end", err, err < tolerance};
}

}  // namespace pointmode::diag
