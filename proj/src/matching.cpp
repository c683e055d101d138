/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/matching.hpp"

#include <limits>
#include <stdexcept>

namespace pointmode::pretrain {

Pairing match_assigned(int query_count, int gt_count) {
    if (query_count < 1 || gt_count < 1) throw std::invalid_argument("match_assigned: counts must be positive");
    Pairing out;
    out.reserve(query_count);
    for (int j = 0; j < query_count; ++j) out.emplace_back(j, j % gt_count);
    return out;
}

std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) throw std::invalid_argument("hungarian_min_cost: empty cost matrix");
    const int m = static_cast<int>(cost[0].size());
    if (m < n) throw std::invalid_argument("hungarian_min_cost: requires rows <= cols");
    constexpr double kInf = std::numeric_limits<double>::infinity();

    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> matched_row(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        matched_row[0] = i;
        int j0 = 0;
        std::vector<double> min_reduced(m + 1, kInf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const int i0 = matched_row[j0];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < min_reduced[j]) {
                    min_reduced[j] = cur;
                    way[j] = j0;
                }
                if (min_reduced[j] < delta) {
                    delta = min_reduced[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_reduced[j] -= delta;
                }
            }
            j0 = j1;
        } while (matched_row[j0] != 0);
        do {
            const int j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (matched_row[j] > 0) row_to_col[matched_row[j] - 1] = j - 1;
    }
    return row_to_col;
}

Pairing match_hungarian(const std::vector<geom::Box3D>& preds, const std::vector<geom::Box3D>& gts) {
    const int q = static_cast<int>(preds.size());
    const int k = static_cast<int>(gts.size());
    if (q < 1 || k < 1) throw std::invalid_argument("match_hungarian: counts must be positive");

    Pairing out;
    if (q <= k) {
        std::vector<std::vector<double>> cost(q, std::vector<double>(k));
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < k; ++j) cost[i][j] = 1.0 - geom::giou(preds[i], gts[j]);
        const std::vector<int> assign = hungarian_min_cost(cost);
        for (int i = 0; i < q; ++i) out.emplace_back(i, assign[i]);
    } else {
        std::vector<std::vector<double>> cost(k, std::vector<double>(q));
        for (int j = 0; j < k; ++j)
            for (int i = 0; i < q; ++i) cost[j][i] = 1.0 - geom::giou(preds[i], gts[j]);
        const std::vector<int> assign = hungarian_min_cost(cost);
        for (int j = 0; j < k; ++j) out.emplace_back(assign[j], j);
    }
    return out;
}

Pairing match_predictions(const std::vector<geom::Box3D>& preds, const std::vector<geom::Box3D>& gts, MatchMode mode) {
    if (mode == MatchMode::kAssigned)
        return match_assigned(static_cast<int>(preds.size()), static_cast<int>(gts.size()));
    return match_hungarian(preds, gts);
}

}  // namespace pointmode::pretrain
