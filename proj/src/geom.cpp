/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pointmode::geom {

PointSet::PointSet(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("PointSet: requires at least one point");
    for (const Vec3& p : points_) {
        for (double c : p) {
            if (!std::isfinite(c)) throw std::invalid_argument("PointSet: non-finite coordinate");
        }
    }
}

std::array<Vec3, 8> Box3D::corners() const {
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
        out[i] = {center[0] + ((i & 1) ? half[0] : -half[0]),
                  center[1] + ((i & 2) ? half[1] : -half[1]),
                  center[2] + ((i & 4) ? half[2] : -half[2])};
    }
    return out;
}

Box3D make_box(const Vec3& center, const Vec3& half) {
    for (double h : half) {
        if (!(h >= 0.0)) throw std::invalid_argument("Box3D: half extents must be >= 0");
    }
    for (double c : center) {
        if (!std::isfinite(c)) throw std::invalid_argument("Box3D: non-finite center");
    }
    return Box3D{center, half};
}

std::vector<int> fps(const PointSet& points, int m, int seed_index) {
    const int n = static_cast<int>(points.size());
    if (m < 1 || m > n) throw std::invalid_argument("fps: m must be in [1, N], got " + std::to_string(m));
    if (seed_index < 0 || seed_index >= n) throw std::invalid_argument("fps: seed index out of range");

    std::vector<int> picked;
    picked.reserve(m);
    picked.push_back(seed_index);

    std::vector<double> min_d2(n);
    for (int i = 0; i < n; ++i) min_d2[i] = dist2(points[i], points[seed_index]);

    for (int step = 1; step < m; ++step) {
        int best = -1;
        double best_d2 = -1.0;
        for (int i = 0; i < n; ++i) {
            if (min_d2[i] > best_d2) {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        picked.push_back(best);
        for (int i = 0; i < n; ++i) min_d2[i] = std::min(min_d2[i], dist2(points[i], points[best]));
    }
    return picked;
}

std::vector<int> knn(const PointSet& points, const Vec3& query, int k) {
    const int n = static_cast<int>(points.size());
    if (k < 1 || k > n) throw std::invalid_argument("knn: k must be in [1, N], got " + std::to_string(k));

    std::vector<std::pair<double, int>> order(n);
    for (int i = 0; i < n; ++i) order[i] = {dist2(points[i], query), i};
    std::partial_sort(order.begin(), order.begin() + k, order.end());

    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) out[i] = order[i].second;
    return out;
}

Box3D aabb_params(const PointSet& points, CenterMode mode) {
    Vec3 lo = points[0], hi = points[0], sum{0.0, 0.0, 0.0};
    for (const Vec3& p : points) {
        for (int d = 0; d < 3; ++d) {
            lo[d] = std::min(lo[d], p[d]);
            hi[d] = std::max(hi[d], p[d]);
            sum[d] += p[d];
        }
    }
    Box3D box;
    for (int d = 0; d < 3; ++d) {
        box.half[d] = (hi[d] - lo[d]) / 2.0;
        box.center[d] = mode == CenterMode::kMean ? sum[d] / static_cast<double>(points.size())
                                                  : (lo[d] + hi[d]) / 2.0;
    }
    return box;
}

double chamfer(const PointSet& a, const PointSet& b) {
    double sum_a = 0.0;
    for (const Vec3& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& q : b) best = std::min(best, dist2(p, q));
        sum_a += best;
    }
    double sum_b = 0.0;
    for (const Vec3& q : b) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& p : a) best = std::min(best, dist2(q, p));
        sum_b += best;
    }
    return sum_a / static_cast<double>(a.size()) + sum_b / static_cast<double>(b.size());
}

namespace {

struct Overlap {
    double inter;
    double uni;
    double enclose;
    bool identical;
};

Overlap box_overlap(const Box3D& a, const Box3D& b) {
    double inter = 1.0, enclose = 1.0;
    for (int d = 0; d < 3; ++d) {
        const double a_lo = a.center[d] - a.half[d], a_hi = a.center[d] + a.half[d];
        const double b_lo = b.center[d] - b.half[d], b_hi = b.center[d] + b.half[d];
        inter *= std::max(0.0, std::min(a_hi, b_hi) - std::max(a_lo, b_lo));
        enclose *= std::max(a_hi, b_hi) - std::min(a_lo, b_lo);
    }
    const double uni = a.volume() + b.volume() - inter;
    return {inter, uni, enclose, a.center == b.center && a.half == b.half};
}

}  // namespace

double iou(const Box3D& a, const Box3D& b) {
    const Overlap o = box_overlap(a, b);
    if (o.uni <= 0.0) return o.identical ? 1.0 : 0.0;
    return o.inter / o.uni;
}

double giou(const Box3D& a, const Box3D& b) {
    const Overlap o = box_overlap(a, b);
    if (o.identical) return 1.0;
    // Differing boxes with zero union volume: IoU is defined as 0 and the
    // enclosure penalty takes its limiting value 1.
    if (o.uni <= 0.0) return -1.0;
    return o.inter / o.uni - (o.enclose - o.uni) / o.enclose;
}

Vec3 rotate_about_up(const Vec3& p, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
}

PointSet rotate_about_up(const PointSet& points, double angle) {
    if (!std::isfinite(angle)) throw std::invalid_argument("rotate_about_up: non-finite angle");
    std::vector<Vec3> out;
    out.reserve(points.size());
    for (const Vec3& p : points) out.push_back(rotate_about_up(p, angle));
    return PointSet(std::move(out));
}

std::pair<PointSet, UnitTransform> normalize_unit(const PointSet& points, const Vec3& center) {
    double scale = 0.0;
    for (const Vec3& p : points) {
        for (int d = 0; d < 3; ++d) scale = std::max(scale, std::abs(p[d] - center[d]));
    }
    if (scale == 0.0) scale = 1.0;  // all points at the center

    std::vector<Vec3> out;
    out.reserve(points.size());
    for (const Vec3& p : points) out.push_back((p - center) * (1.0 / scale));
    return {PointSet(std::move(out)), UnitTransform{center, scale}};
}

std::pair<PointSet, UnitTransform> normalize_unit(const PointSet& points) {
    Vec3 mean{0.0, 0.0, 0.0};
    for (const Vec3& p : points) mean = mean + p;
    return normalize_unit(points, mean * (1.0 / static_cast<double>(points.size())));
}

}  // namespace pointmode::geom
