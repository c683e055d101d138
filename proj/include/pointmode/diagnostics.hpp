/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <string>
#include <vector>

namespace pointmode::diag {

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0.0;
    bool pass = false;
};

// Central-difference checks of every differentiable primitive against its
// backward rule, several random instances each. 64-bit only.
std::vector<GradCheckResult> run_primitive_grad_checks(int seeds = 10, double tolerance = 1e-4, double step = 1e-5);

// The joint pretraining loss on a micro model (feature dim 8, 4 patches,
// 2 blocks, 2 queries), checked against central differences over every
// parameter. The gradient barrier is disabled so the analytic path covers
// the whole graph.
GradCheckResult run_end_to_end_grad_check(double tolerance = 1e-4, double step = 1e-5);

}  // namespace pointmode::diag
