/* SPDX-License-Identifier: Apache-2.0 */
// Brute-force reference implementations used to check the library kernels.
// These deliberately share no code with the implementations they verify.
#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "pointmode/geom.hpp"

namespace oracles {

using pointmode::geom::PointSet;
using pointmode::geom::Vec3;

inline double sqdist(const Vec3& a, const Vec3& b) {
    double s = 0.0;
    for (int d = 0; d < 3; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
}

// Farthest point sampling recomputed from a full distance matrix each round.
inline std::vector<int> fps_brute(const PointSet& pts, int m, int seed) {
    const int n = static_cast<int>(pts.size());
    std::vector<std::vector<double>> dist(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dist[i][j] = sqdist(pts[i], pts[j]);

    std::vector<int> chosen{seed};
    while (static_cast<int>(chosen.size()) < m) {
        int best = -1;
        double best_min = -1.0;
        for (int cand = 0; cand < n; ++cand) {
            double min_d = std::numeric_limits<double>::infinity();
            for (int c : chosen) min_d = std::min(min_d, dist[cand][c]);
            if (min_d > best_min) {
                best_min = min_d;
                best = cand;
            }
        }
        chosen.push_back(best);
    }
    return chosen;
}

// k-NN by stable full sort on (distance, index).
inline std::vector<int> knn_brute(const PointSet& pts, const Vec3& query, int k) {
    std::vector<int> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double da = sqdist(pts[a], query), db = sqdist(pts[b], query);
        if (da != db) return da < db;
        return a < b;
    });
    order.resize(k);
    return order;
}

// Symmetric squared Chamfer from a full pairwise matrix.
inline double chamfer_brute(const PointSet& a, const PointSet& b) {
    std::vector<std::vector<double>> d(a.size(), std::vector<double>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) d[i][j] = sqdist(a[i], b[j]);
    double sum_a = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum_a += *std::min_element(d[i].begin(), d[i].end());
    double sum_b = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
        double best = d[0][j];
        for (std::size_t i = 1; i < a.size(); ++i) best = std::min(best, d[i][j]);
        sum_b += best;
    }
    return sum_a / static_cast<double>(a.size()) + sum_b / static_cast<double>(b.size());
}

// Exhaustive minimum-cost assignment over all permutations (square, n <= ~7).
inline std::pair<std::vector<int>, double> assignment_brute(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    std::vector<int> perm(cost[0].size());
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best_perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += cost[i][perm[i]];
        if (c < best_cost) {
            best_cost = c;
            best_perm.assign(perm.begin(), perm.begin() + n);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return {best_perm, best_cost};
}

}  // namespace oracles
