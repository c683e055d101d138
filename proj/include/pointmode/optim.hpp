/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pointmode/autodiff.hpp"

namespace pointmode::optim {

struct AdamWConfig {
    double lr = 5e-4;
    double weight_decay = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Decoupled-weight-decay Adam. Each step applies param -= lr*wd*param first,
// then the bias-corrected moment update. Deterministic given inputs.
class AdamW {
public:
    AdamW(std::vector<ad::Tensor> params, AdamWConfig cfg);

    void step();
    void zero_grad();

    std::uint64_t step_count() const { return step_count_; }
    double lr() const { return cfg_.lr; }
    void set_lr(double lr) { cfg_.lr = lr; }
    const AdamWConfig& config() const { return cfg_; }
    const std::vector<ad::Tensor>& params() const { return params_; }

    // Serialized slot access for checkpoints, index-aligned with params().
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }
    void restore(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v, std::uint64_t steps);

private:
    std::vector<ad::Tensor> params_;
    AdamWConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::uint64_t step_count_ = 0;
};

// Max over components of |analytic - central difference| / max(1, |analytic|).
// f must rebuild its graph from the current values of wrt on every call and
// must be deterministic.
double grad_check(const std::function<ad::Tensor()>& f, const std::vector<ad::Tensor>& wrt, double step = 1e-5);
double grad_check(const std::function<ad::Tensor()>& f, const ad::Tensor& wrt, double step = 1e-5);

}  // namespace pointmode::optim
