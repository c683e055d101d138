/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pointmode::ad {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::int64_t shape_size(const Shape& s);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;
    const char* op = "leaf";
    std::string name;

    std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), 0.0);
    }
};

}  // namespace detail

// Value-semantic handle to a node of a dynamically built computation graph.
// Intermediate nodes are freed when the last handle to the subgraph drops;
// parameters stay alive in their owner. All math is 64-bit.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value);

    // Extension point used by all primitives: new node with given parents and
    // backward rule. Checks every produced value for finiteness and reports
    // the offending op by name.
    static Tensor make_op(const char* op, Shape shape, std::vector<double> values,
                          std::vector<Tensor> parents, std::function<void(detail::Node&)> backward);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::int64_t size() const;
    int rows() const;  // 2-D view helpers; 1-D tensors are 1 x n
    int cols() const;

    std::vector<double>& values();
    const std::vector<double>& values() const;
    double value_at(std::int64_t i) const { return values()[static_cast<std::size_t>(i)]; }
    double scalar_value() const;

    bool requires_grad() const;
    // Gradient accumulated by backward(); zeros if nothing reached this node.
    std::vector<double> grad() const;
    // Const like backward(): the handle is shared, the node state mutates.
    void zero_grad() const;

    void set_name(std::string name);
    const std::string& name() const;

    // Reverse-mode accumulation from this scalar into every reachable node
    // with requires_grad. Accumulates into existing grads; call zero_grad on
    // parameters between independent backward passes.
    void backward() const;

    detail::Node* node() const { return node_.get(); }
    std::shared_ptr<detail::Node> node_ptr() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

// ---- primitive set ---------------------------------------------------------
// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
// Row-broadcast: a is m x n, v is 1 x n.
Tensor add_rowvec(const Tensor& a, const Tensor& v);
Tensor mul_rowvec(const Tensor& a, const Tensor& v);
// Scalar constants.
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);  // (m x k)(k x n)
Tensor transpose(const Tensor& a);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int row0, int row1);
Tensor slice_cols(const Tensor& a, int col0, int col1);
// Row gather; doubles as embedding lookup on a parameter table. Repeated
// indices accumulate on backward.
Tensor gather_rows(const Tensor& a, const std::vector<int>& indices);
inline Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
    return gather_rows(table, ids);
}
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor reduce_max_rows(const Tensor& a);   // m x n -> 1 x n, columnwise max
Tensor reduce_mean_rows(const Tensor& a);  // m x n -> 1 x n, columnwise mean

Tensor softmax_rows(const Tensor& a);
Tensor layer_norm_rows(const Tensor& a, double eps = 1e-8);  // pre-affine
Tensor gelu(const Tensor& a);  // exact erf form
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor min_elem(const Tensor& a, const Tensor& b);  // ties take a
Tensor max_elem(const Tensor& a, const Tensor& b);

// Symmetric squared-L2 Chamfer distance between a (n x 3) and b (m x 3),
// mean-reduced on both sides; scalar output. Nearest-neighbor choice is
// piecewise constant (lowest index on ties).
Tensor chamfer_sq(const Tensor& a, const Tensor& b);

// Mean negative log-likelihood of labels under row-softmax of logits.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Forward identity whose backward contributes exactly zero to all ancestors.
Tensor stop_gradient(const Tensor& a);

}  // namespace pointmode::ad
