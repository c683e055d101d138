/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

namespace pointmode::ad {

using detail::Node;

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

std::int64_t shape_size(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void check_finite(const char* op, const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) throw std::runtime_error(std::string(op) + ": produced non-finite value");
    }
}

void accum(Node& n, std::int64_t i, double g) {
    n.grad[static_cast<std::size_t>(i)] += g;
}

struct Dims {
    int rows;
    int cols;
};

Dims dims2(const char* op, const Tensor& t) {
    const Shape& s = t.shape();
    if (s.size() == 1) return {1, s[0]};
    if (s.size() == 2) return {s[0], s[1]};
    throw std::invalid_argument(std::string(op) + ": expected 1-D or 2-D tensor, got " + shape_str(s));
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return from_values(shape, std::vector<double>(static_cast<std::size_t>(shape_size(shape)), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    return from_values(shape, std::vector<double>(static_cast<std::size_t>(shape_size(shape)), value), requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_size(shape) != static_cast<std::int64_t>(values.size()))
        throw std::invalid_argument("Tensor: value count does not match shape " + shape_str(shape));
    check_finite("leaf", values);
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(double value) { return from_values({1}, {value}); }

Tensor Tensor::make_op(const char* op, Shape shape, std::vector<double> values,
                       std::vector<Tensor> parents, std::function<void(Node&)> backward) {
    if (shape_size(shape) != static_cast<std::int64_t>(values.size()))
        throw std::invalid_argument(std::string(op) + ": value count does not match shape");
    check_finite(op, values);
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    t.node_->op = op;
    bool needs = false;
    t.node_->parents.reserve(parents.size());
    for (const Tensor& p : parents) {
        if (!p.defined()) throw std::invalid_argument(std::string(op) + ": undefined parent tensor");
        needs = needs || p.node()->requires_grad;
        t.node_->parents.push_back(p.node_ptr());
    }
    t.node_->requires_grad = needs;
    if (needs) t.node_->backward = std::move(backward);
    return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::int64_t Tensor::size() const { return node_->size(); }
int Tensor::rows() const { return dims2("tensor", *this).rows; }
int Tensor::cols() const { return dims2("tensor", *this).cols; }

std::vector<double>& Tensor::values() { return node_->values; }
const std::vector<double>& Tensor::values() const { return node_->values; }

double Tensor::scalar_value() const {
    if (size() != 1) throw std::invalid_argument("scalar_value: tensor has " + std::to_string(size()) + " elements");
    return node_->values[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

std::vector<double> Tensor::grad() const {
    if (node_->grad.empty()) return std::vector<double>(node_->values.size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() const { node_->grad.assign(node_->values.size(), 0.0); }

void Tensor::set_name(std::string name) { node_->name = std::move(name); }
const std::string& Tensor::name() const { return node_->name; }

void Tensor::backward() const {
    if (!defined()) throw std::invalid_argument("backward: undefined tensor");
    if (size() != 1) throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(shape()));

    // Iterative post-order DFS; reverse gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->backward || n->grad.empty()) continue;
        for (auto& p : n->parents) {
            if (p->requires_grad) p->ensure_grad();
        }
        n->backward(*n);
    }
}

// ---- elementwise ------------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_elem(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
    if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i]);
    Node* pa = a.node();
    Node* pb = b.node();
    return Tensor::make_op(op, a.shape(), std::move(out), {a, b}, [pa, pb, bwd](Node& self) {
        for (std::int64_t i = 0; i < self.size(); ++i) {
            const double g = self.grad[static_cast<std::size_t>(i)];
            const auto [da, db] = bwd(pa->values[static_cast<std::size_t>(i)], pb->values[static_cast<std::size_t>(i)],
                                      self.values[static_cast<std::size_t>(i)]);
            if (pa->requires_grad) accum(*pa, i, g * da);
            if (pb->requires_grad) accum(*pb, i, g * db);
        }
    });
}

template <typename Fwd, typename Bwd>
Tensor unary_elem(const char* op, const Tensor& a, Fwd fwd, Bwd bwd) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    Node* pa = a.node();
    return Tensor::make_op(op, a.shape(), std::move(out), {a}, [pa, bwd](Node& self) {
        if (!pa->requires_grad) return;
        for (std::int64_t i = 0; i < self.size(); ++i) {
            const double g = self.grad[static_cast<std::size_t>(i)];
            accum(*pa, i, g * bwd(pa->values[static_cast<std::size_t>(i)], self.values[static_cast<std::size_t>(i)]));
        }
    });
}

struct Pair {
    double first;
    double second;
};

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elem("add", a, b, [](double x, double y) { return x + y; },
                       [](double, double, double) { return Pair{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elem("sub", a, b, [](double x, double y) { return x - y; },
                       [](double, double, double) { return Pair{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elem("mul", a, b, [](double x, double y) { return x * y; },
                       [](double x, double y, double) { return Pair{y, x}; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_elem("div", a, b, [](double x, double y) { return x / y; },
                       [](double x, double y, double) { return Pair{1.0 / y, -x / (y * y)}; });
}

Tensor min_elem(const Tensor& a, const Tensor& b) {
    return binary_elem("min_elem", a, b, [](double x, double y) { return x <= y ? x : y; },
                       [](double x, double y, double) { return x <= y ? Pair{1.0, 0.0} : Pair{0.0, 1.0}; });
}

Tensor max_elem(const Tensor& a, const Tensor& b) {
    return binary_elem("max_elem", a, b, [](double x, double y) { return x >= y ? x : y; },
                       [](double x, double y, double) { return x >= y ? Pair{1.0, 0.0} : Pair{0.0, 1.0}; });
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    const Dims d = dims2("add_rowvec", a);
    if (v.size() != d.cols) shape_error("add_rowvec", a.shape(), v.shape());
    const auto& av = a.values();
    const auto& vv = v.values();
    std::vector<double> out(av.size());
    for (int r = 0; r < d.rows; ++r)
        for (int c = 0; c < d.cols; ++c) out[r * d.cols + c] = av[r * d.cols + c] + vv[c];
    Node* pa = a.node();
    Node* pv = v.node();
    return Tensor::make_op("add_rowvec", a.shape(), std::move(out), {a, v}, [pa, pv, d](Node& self) {
        for (int r = 0; r < d.rows; ++r) {
            for (int c = 0; c < d.cols; ++c) {
                const double g = self.grad[r * d.cols + c];
                if (pa->requires_grad) accum(*pa, r * d.cols + c, g);
                if (pv->requires_grad) accum(*pv, c, g);
            }
        }
    });
}

Tensor mul_rowvec(const Tensor& a, const Tensor& v) {
    const Dims d = dims2("mul_rowvec", a);
    if (v.size() != d.cols) shape_error("mul_rowvec", a.shape(), v.shape());
    const auto& av = a.values();
    const auto& vv = v.values();
    std::vector<double> out(av.size());
    for (int r = 0; r < d.rows; ++r)
        for (int c = 0; c < d.cols; ++c) out[r * d.cols + c] = av[r * d.cols + c] * vv[c];
    Node* pa = a.node();
    Node* pv = v.node();
    return Tensor::make_op("mul_rowvec", a.shape(), std::move(out), {a, v}, [pa, pv, d](Node& self) {
        for (int r = 0; r < d.rows; ++r) {
            for (int c = 0; c < d.cols; ++c) {
                const double g = self.grad[r * d.cols + c];
                if (pa->requires_grad) accum(*pa, r * d.cols + c, g * pv->values[c]);
                if (pv->requires_grad) accum(*pv, c, g * pa->values[r * d.cols + c]);
            }
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    return unary_elem("scale", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary_elem("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
    return unary_elem("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
    constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return unary_elem(
        "gelu", a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
        [](double x, double) {
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            return cdf + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
        });
}

Tensor softplus(const Tensor& a) {
    return unary_elem(
        "softplus", a,
        [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
        [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

// ---- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Dims da = dims2("matmul", a);
    const Dims db = dims2("matmul", b);
    if (da.cols != db.rows) shape_error("matmul", a.shape(), b.shape());
    const int m = da.rows, k = da.cols, n = db.cols;
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    {
        const double* av = a.values().data();
        const double* bv = b.values().data();
        double* ov = out.data();
        for (int i = 0; i < m; ++i) {
            for (int kk = 0; kk < k; ++kk) {
                const double aik = av[i * k + kk];
                const double* brow = bv + kk * n;
                double* orow = ov + i * n;
                for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
            }
        }
    }
    Node* pa = a.node();
    Node* pb = b.node();
    return Tensor::make_op("matmul", {m, n}, std::move(out), {a, b}, [pa, pb, m, k, n](Node& self) {
        const double* g = self.grad.data();
        if (pa->requires_grad) {
            double* dav = pa->grad.data();
            const double* bv = pb->values.data();
            for (int i = 0; i < m; ++i) {
                for (int kk = 0; kk < k; ++kk) {
                    double acc = 0.0;
                    const double* grow = g + i * n;
                    const double* brow = bv + kk * n;
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    dav[i * k + kk] += acc;
                }
            }
        }
        if (pb->requires_grad) {
            double* dbv = pb->grad.data();
            const double* av = pa->values.data();
            for (int i = 0; i < m; ++i) {
                const double* grow = g + i * n;
                for (int kk = 0; kk < k; ++kk) {
                    const double aik = av[i * k + kk];
                    double* drow = dbv + kk * n;
                    for (int j = 0; j < n; ++j) drow[j] += aik * grow[j];
                }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    const Dims d = dims2("transpose", a);
    std::vector<double> out(a.values().size());
    for (int r = 0; r < d.rows; ++r)
        for (int c = 0; c < d.cols; ++c) out[c * d.rows + r] = a.values()[r * d.cols + c];
    Node* pa = a.node();
    return Tensor::make_op("transpose", {d.cols, d.rows}, std::move(out), {a}, [pa, d](Node& self) {
        if (!pa->requires_grad) return;
        for (int r = 0; r < d.rows; ++r)
            for (int c = 0; c < d.cols; ++c) accum(*pa, r * d.cols + c, self.grad[c * d.rows + r]);
    });
}

// ---- structure --------------------------------------------------------------

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    const int cols = dims2("concat_rows", parts[0]).cols;
    int rows = 0;
    std::vector<double> out;
    for (const Tensor& p : parts) {
        const Dims d = dims2("concat_rows", p);
        if (d.cols != cols) shape_error("concat_rows", parts[0].shape(), p.shape());
        rows += d.rows;
        out.insert(out.end(), p.values().begin(), p.values().end());
    }
    std::vector<Node*> nodes;
    for (const Tensor& p : parts) nodes.push_back(p.node());
    return Tensor::make_op("concat_rows", {rows, cols}, std::move(out), parts, [nodes](Node& self) {
        std::size_t offset = 0;
        for (Node* p : nodes) {
            const std::size_t count = p->values.size();
            if (p->requires_grad) {
                for (std::size_t i = 0; i < count; ++i) p->grad[i] += self.grad[offset + i];
            }
            offset += count;
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    const int rows = dims2("concat_cols", parts[0]).rows;
    int cols = 0;
    std::vector<int> widths;
    for (const Tensor& p : parts) {
        const Dims d = dims2("concat_cols", p);
        if (d.rows != rows) shape_error("concat_cols", parts[0].shape(), p.shape());
        widths.push_back(d.cols);
        cols += d.cols;
    }
    std::vector<double> out(static_cast<std::size_t>(rows) * cols);
    int col0 = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const auto& pv = parts[pi].values();
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < widths[pi]; ++c) out[r * cols + col0 + c] = pv[r * widths[pi] + c];
        col0 += widths[pi];
    }
    std::vector<Node*> nodes;
    for (const Tensor& p : parts) nodes.push_back(p.node());
    return Tensor::make_op("concat_cols", {rows, cols}, std::move(out), parts, [nodes, widths, rows, cols](Node& self) {
        int c0 = 0;
        for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
            Node* p = nodes[pi];
            if (p->requires_grad) {
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < widths[pi]; ++c) p->grad[r * widths[pi] + c] += self.grad[r * cols + c0 + c];
            }
            c0 += widths[pi];
        }
    });
}

Tensor slice_rows(const Tensor& a, int row0, int row1) {
    const Dims d = dims2("slice_rows", a);
    if (row0 < 0 || row1 > d.rows || row0 >= row1)
        throw std::invalid_argument("slice_rows: bad range [" + std::to_string(row0) + ", " + std::to_string(row1) +
                                    ") for " + shape_str(a.shape()));
    std::vector<double> out(a.values().begin() + static_cast<std::size_t>(row0) * d.cols,
                            a.values().begin() + static_cast<std::size_t>(row1) * d.cols);
    Node* pa = a.node();
    return Tensor::make_op("slice_rows", {row1 - row0, d.cols}, std::move(out), {a}, [pa, row0, d](Node& self) {
        if (!pa->requires_grad) return;
        const std::size_t base = static_cast<std::size_t>(row0) * d.cols;
        for (std::size_t i = 0; i < self.values.size(); ++i) pa->grad[base + i] += self.grad[i];
    });
}

Tensor slice_cols(const Tensor& a, int col0, int col1) {
    const Dims d = dims2("slice_cols", a);
    if (col0 < 0 || col1 > d.cols || col0 >= col1)
        throw std::invalid_argument("slice_cols: bad range [" + std::to_string(col0) + ", " + std::to_string(col1) +
                                    ") for " + shape_str(a.shape()));
    const int w = col1 - col0;
    std::vector<double> out(static_cast<std::size_t>(d.rows) * w);
    for (int r = 0; r < d.rows; ++r)
        for (int c = 0; c < w; ++c) out[r * w + c] = a.values()[r * d.cols + col0 + c];
    Node* pa = a.node();
    return Tensor::make_op("slice_cols", {d.rows, w}, std::move(out), {a}, [pa, col0, w, d](Node& self) {
        if (!pa->requires_grad) return;
        for (int r = 0; r < d.rows; ++r)
            for (int c = 0; c < w; ++c) pa->grad[r * d.cols + col0 + c] += self.grad[r * w + c];
    });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& indices) {
    const Dims d = dims2("gather_rows", a);
    if (indices.empty()) throw std::invalid_argument("gather_rows: empty index list");
    std::vector<double> out;
    out.reserve(indices.size() * static_cast<std::size_t>(d.cols));
    for (int idx : indices) {
        if (idx < 0 || idx >= d.rows)
            throw std::invalid_argument("gather_rows: index " + std::to_string(idx) + " out of range for " +
                                        shape_str(a.shape()));
        out.insert(out.end(), a.values().begin() + static_cast<std::size_t>(idx) * d.cols,
                   a.values().begin() + static_cast<std::size_t>(idx + 1) * d.cols);
    }
    Node* pa = a.node();
    return Tensor::make_op("gather_rows", {static_cast<int>(indices.size()), d.cols}, std::move(out), {a},
                           [pa, indices, d](Node& self) {
                               if (!pa->requires_grad) return;
                               for (std::size_t r = 0; r < indices.size(); ++r) {
                                   const std::size_t src = r * d.cols;
                                   const std::size_t dst = static_cast<std::size_t>(indices[r]) * d.cols;
                                   for (int c = 0; c < d.cols; ++c) pa->grad[dst + c] += self.grad[src + c];
                               }
                           });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_size(shape) != a.size())
        throw std::invalid_argument("reshape: element count mismatch, " + shape_str(a.shape()) + " to " +
                                    shape_str(shape));
    Node* pa = a.node();
    return Tensor::make_op("reshape", std::move(shape), a.values(), {a}, [pa](Node& self) {
        if (!pa->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    });
}

// ---- reductions -------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a.values()) s += x;
    Node* pa = a.node();
    return Tensor::make_op("sum_all", {1}, {s}, {a}, [pa](Node& self) {
        if (!pa->requires_grad) return;
        const double g = self.grad[0];
        for (double& d : pa->grad) d += g;
    });
}

Tensor mean_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a.values()) s += x;
    const double inv = 1.0 / static_cast<double>(a.size());
    Node* pa = a.node();
    return Tensor::make_op("mean_all", {1}, {s * inv}, {a}, [pa, inv](Node& self) {
        if (!pa->requires_grad) return;
        const double g = self.grad[0] * inv;
        for (double& d : pa->grad) d += g;
    });
}

Tensor reduce_max_rows(const Tensor& a) {
    const Dims d = dims2("reduce_max_rows", a);
    std::vector<double> out(d.cols);
    std::vector<int> arg(d.cols, 0);
    for (int c = 0; c < d.cols; ++c) {
        double best = a.values()[c];
        int best_r = 0;
        for (int r = 1; r < d.rows; ++r) {
            const double v = a.values()[r * d.cols + c];
            if (v > best) {
                best = v;
                best_r = r;
            }
        }
        out[c] = best;
        arg[c] = best_r;
    }
    Node* pa = a.node();
    return Tensor::make_op("reduce_max_rows", {1, d.cols}, std::move(out), {a}, [pa, arg, d](Node& self) {
        if (!pa->requires_grad) return;
        for (int c = 0; c < d.cols; ++c) pa->grad[arg[c] * d.cols + c] += self.grad[c];
    });
}

Tensor reduce_mean_rows(const Tensor& a) {
    const Dims d = dims2("reduce_mean_rows", a);
    const double inv = 1.0 / static_cast<double>(d.rows);
    std::vector<double> out(d.cols, 0.0);
    for (int r = 0; r < d.rows; ++r)
        for (int c = 0; c < d.cols; ++c) out[c] += a.values()[r * d.cols + c];
    for (double& x : out) x *= inv;
    Node* pa = a.node();
    return Tensor::make_op("reduce_mean_rows", {1, d.cols}, std::move(out), {a}, [pa, d, inv](Node& self) {
        if (!pa->requires_grad) return;
        for (int r = 0; r < d.rows; ++r)
            for (int c = 0; c < d.cols; ++c) pa->grad[r * d.cols + c] += self.grad[c] * inv;
    });
}

// ---- row-structured nonlinearities -------------------------------------------

Tensor softmax_rows(const Tensor& a) {
    const Dims d = dims2("softmax_rows", a);
    std::vector<double> out(a.values().size());
    for (int r = 0; r < d.rows; ++r) {
        const double* row = a.values().data() + static_cast<std::size_t>(r) * d.cols;
        double mx = row[0];
        for (int c = 1; c < d.cols; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int c = 0; c < d.cols; ++c) {
            out[r * d.cols + c] = std::exp(row[c] - mx);
            z += out[r * d.cols + c];
        }
        for (int c = 0; c < d.cols; ++c) out[r * d.cols + c] /= z;
    }
    Node* pa = a.node();
    return Tensor::make_op("softmax_rows", a.shape(), std::move(out), {a}, [pa, d](Node& self) {
        if (!pa->requires_grad) return;
        for (int r = 0; r < d.rows; ++r) {
            const double* y = self.values.data() + static_cast<std::size_t>(r) * d.cols;
            const double* g = self.grad.data() + static_cast<std::size_t>(r) * d.cols;
            double dot = 0.0;
            for (int c = 0; c < d.cols; ++c) dot += g[c] * y[c];
            for (int c = 0; c < d.cols; ++c) pa->grad[r * d.cols + c] += y[c] * (g[c] - dot);
        }
    });
}

Tensor layer_norm_rows(const Tensor& a, double eps) {
    const Dims d = dims2("layer_norm_rows", a);
    std::vector<double> out(a.values().size());
    std::vector<double> inv_std(d.rows);
    for (int r = 0; r < d.rows; ++r) {
        const double* row = a.values().data() + static_cast<std::size_t>(r) * d.cols;
        double mean = 0.0;
        for (int c = 0; c < d.cols; ++c) mean += row[c];
        mean /= d.cols;
        double var = 0.0;
        for (int c = 0; c < d.cols; ++c) var += (row[c] - mean) * (row[c] - mean);
        var /= d.cols;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int c = 0; c < d.cols; ++c) out[r * d.cols + c] = (row[c] - mean) * is;
    }
    Node* pa = a.node();
    return Tensor::make_op("layer_norm_rows", a.shape(), std::move(out), {a}, [pa, d, inv_std](Node& self) {
        if (!pa->requires_grad) return;
        for (int r = 0; r < d.rows; ++r) {
            const double* y = self.values.data() + static_cast<std::size_t>(r) * d.cols;
            const double* g = self.grad.data() + static_cast<std::size_t>(r) * d.cols;
            double g_mean = 0.0, gy_mean = 0.0;
            for (int c = 0; c < d.cols; ++c) {
                g_mean += g[c];
                gy_mean += g[c] * y[c];
            }
            g_mean /= d.cols;
            gy_mean /= d.cols;
            for (int c = 0; c < d.cols; ++c)
                pa->grad[r * d.cols + c] += inv_std[r] * (g[c] - g_mean - y[c] * gy_mean);
        }
    });
}

// ---- task-specific primitives -------------------------------------------------

Tensor chamfer_sq(const Tensor& a, const Tensor& b) {
    const Dims da = dims2("chamfer_sq", a);
    const Dims db = dims2("chamfer_sq", b);
    if (da.cols != 3 || db.cols != 3) shape_error("chamfer_sq", a.shape(), b.shape());
    if (da.rows < 1 || db.rows < 1) throw std::invalid_argument("chamfer_sq: empty point set");
    const int n = da.rows, m = db.rows;
    const double* av = a.values().data();
    const double* bv = b.values().data();

    auto d2 = [&](int i, int j) {
        const double dx = av[i * 3] - bv[j * 3];
        const double dy = av[i * 3 + 1] - bv[j * 3 + 1];
        const double dz = av[i * 3 + 2] - bv[j * 3 + 2];
        return dx * dx + dy * dy + dz * dz;
    };

    std::vector<int> nn_a(n, 0), nn_b(m, 0);
    double sum_a = 0.0, sum_b = 0.0;
    for (int i = 0; i < n; ++i) {
        double best = d2(i, 0);
        for (int j = 1; j < m; ++j) {
            const double v = d2(i, j);
            if (v < best) {
                best = v;
                nn_a[i] = j;
            }
        }
        sum_a += best;
    }
    for (int j = 0; j < m; ++j) {
        double best = d2(0, j);
        for (int i = 1; i < n; ++i) {
            const double v = d2(i, j);
            if (v < best) {
                best = v;
                nn_b[j] = i;
            }
        }
        sum_b += best;
    }
    const double value = sum_a / n + sum_b / m;

    Node* pa = a.node();
    Node* pb = b.node();
    return Tensor::make_op("chamfer_sq", {1}, {value}, {a, b}, [pa, pb, nn_a, nn_b, n, m](Node& self) {
        const double g = self.grad[0];
        const double* avv = pa->values.data();
        const double* bvv = pb->values.data();
        const double wa = 2.0 * g / n;
        const double wb = 2.0 * g / m;
        for (int i = 0; i < n; ++i) {
            const int j = nn_a[i];
            for (int c = 0; c < 3; ++c) {
                const double diff = avv[i * 3 + c] - bvv[j * 3 + c];
                if (pa->requires_grad) pa->grad[i * 3 + c] += wa * diff;
                if (pb->requires_grad) pb->grad[j * 3 + c] -= wa * diff;
            }
        }
        for (int j = 0; j < m; ++j) {
            const int i = nn_b[j];
            for (int c = 0; c < 3; ++c) {
                const double diff = bvv[j * 3 + c] - avv[i * 3 + c];
                if (pb->requires_grad) pb->grad[j * 3 + c] += wb * diff;
                if (pa->requires_grad) pa->grad[i * 3 + c] -= wb * diff;
            }
        }
    });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    const Dims d = dims2("cross_entropy", logits);
    if (static_cast<int>(labels.size()) != d.rows)
        throw std::invalid_argument("cross_entropy: label count " + std::to_string(labels.size()) +
                                    " does not match rows of " + shape_str(logits.shape()));
    for (int l : labels) {
        if (l < 0 || l >= d.cols) throw std::invalid_argument("cross_entropy: label out of range");
    }
    double loss = 0.0;
    for (int r = 0; r < d.rows; ++r) {
        const double* row = logits.values().data() + static_cast<std::size_t>(r) * d.cols;
        double mx = row[0];
        for (int c = 1; c < d.cols; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int c = 0; c < d.cols; ++c) z += std::exp(row[c] - mx);
        loss += mx + std::log(z) - row[labels[r]];
    }
    loss /= d.rows;
    Node* pa = logits.node();
    return Tensor::make_op("cross_entropy", {1}, {loss}, {logits}, [pa, labels, d](Node& self) {
        if (!pa->requires_grad) return;
        const double g = self.grad[0] / d.rows;
        for (int r = 0; r < d.rows; ++r) {
            const double* row = pa->values.data() + static_cast<std::size_t>(r) * d.cols;
            double mx = row[0];
            for (int c = 1; c < d.cols; ++c) mx = std::max(mx, row[c]);
            double z = 0.0;
            for (int c = 0; c < d.cols; ++c) z += std::exp(row[c] - mx);
            for (int c = 0; c < d.cols; ++c) {
                const double p = std::exp(row[c] - mx) / z;
                pa->grad[r * d.cols + c] += g * (p - (c == labels[r] ? 1.0 : 0.0));
            }
        }
    });
}

Tensor stop_gradient(const Tensor& a) {
    // A fresh leaf holding a copy of the values: no edge exists back to the
    // source, so backward cannot reach any ancestor of a.
    Tensor t = Tensor::from_values(a.shape(), a.values(), false);
    t.node()->op = "stop_gradient";
    return t;
}

}  // namespace pointmode::ad
