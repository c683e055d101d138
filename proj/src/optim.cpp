/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace pointmode::optim {

AdamW::AdamW(std::vector<ad::Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.lr >= 0.0)) throw std::invalid_argument("AdamW: lr must be >= 0");
    if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0)
        throw std::invalid_argument("AdamW: betas must be in [0, 1)");
    if (!(cfg_.eps > 0.0)) throw std::invalid_argument("AdamW: eps must be > 0");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const ad::Tensor& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void AdamW::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        ad::Tensor& p = params_[pi];
        const std::vector<double> g = p.grad();
        std::vector<double>& w = p.values();
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        if (g.size() != w.size()) throw std::invalid_argument("AdamW: grad/param shape mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] -= cfg_.lr * cfg_.weight_decay * w[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
    }
}

void AdamW::zero_grad() {
    for (ad::Tensor& p : params_) p.zero_grad();
}

void AdamW::restore(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v, std::uint64_t steps) {
    if (m.size() != params_.size() || v.size() != params_.size())
        throw std::invalid_argument("AdamW::restore: slot count mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (m[i].size() != params_[i].values().size() || v[i].size() != params_[i].values().size())
            throw std::invalid_argument("AdamW::restore: slot shape mismatch");
    }
    m_ = std::move(m);
    v_ = std::move(v);
    step_count_ = steps;
}

double grad_check(const std::function<ad::Tensor()>& f, const std::vector<ad::Tensor>& wrt, double step) {
    std::vector<ad::Tensor> vars = wrt;
    for (ad::Tensor& t : vars) t.zero_grad();
    ad::Tensor loss = f();
    loss.backward();

    std::vector<std::vector<double>> analytic;
    analytic.reserve(vars.size());
    for (const ad::Tensor& t : vars) analytic.push_back(t.grad());

    double max_err = 0.0;
    for (std::size_t ti = 0; ti < vars.size(); ++ti) {
        std::vector<double>& vals = vars[ti].values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + step;
            const double fp = f().scalar_value();
            vals[i] = saved - step;
            const double fm = f().scalar_value();
            vals[i] = saved;
            const double fd = (fp - fm) / (2.0 * step);
            const double a = analytic[ti][i];
            const double err = std::abs(a - fd) / std::max(1.0, std::abs(a));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

double grad_check(const std::function<ad::Tensor()>& f, const ad::Tensor& wrt, double step) {
    return grad_check(f, std::vector<ad::Tensor>{wrt}, step);
}

}  // namespace pointmode::optim
