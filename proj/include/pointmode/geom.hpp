/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

// Vec3 is a plain std::array, so these operators live in the enclosing
// pointmode namespace where every submodule finds them by ordinary lookup.
namespace pointmode {

using Vec3d = std::array<double, 3>;

inline Vec3d operator+(const Vec3d& a, const Vec3d& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3d operator-(const Vec3d& a, const Vec3d& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3d operator*(const Vec3d& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

}  // namespace pointmode

namespace pointmode::geom {

using Vec3 = pointmode::Vec3d;

inline double dist2(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

// N x 3 coordinate carrier for scenes, blocks and patches. Construction
// rejects empty sets and non-finite coordinates.
class PointSet {
public:
    PointSet() = default;
    explicit PointSet(std::vector<Vec3> points);

    std::size_t size() const { return points_.size(); }
    const Vec3& operator[](std::size_t i) const { return points_[i]; }
    const std::vector<Vec3>& points() const { return points_; }

    auto begin() const { return points_.begin(); }
    auto end() const { return points_.end(); }

private:
    std::vector<Vec3> points_;
};

// Axis-aligned box given by center and per-axis half extents (>= 0).
// Corner i flips sign per axis by bit: bit0 -> +x, bit1 -> +y, bit2 -> +z.
struct Box3D {
    Vec3 center{0.0, 0.0, 0.0};
    Vec3 half{0.0, 0.0, 0.0};

    std::array<Vec3, 8> corners() const;
    double volume() const { return 8.0 * half[0] * half[1] * half[2]; }
    Vec3 min() const { return center - half; }
    Vec3 max() const { return center + half; }
};

Box3D make_box(const Vec3& center, const Vec3& half);

// Farthest point sampling. First pick is seed_index; each subsequent pick
// maximizes the minimum distance to everything already picked, ties broken
// by lowest index.
std::vector<int> fps(const PointSet& points, int m, int seed_index);

// k nearest neighbors of query, ordered by (distance, index).
std::vector<int> knn(const PointSet& points, const Vec3& query, int k);

enum class CenterMode { kMean, kMidpoint };

// Bounding box with half extents (max-min)/2 per axis. kMean centers on the
// per-axis mean of the points (may not enclose them all); kMidpoint centers
// on (min+max)/2 and always encloses.
Box3D aabb_params(const PointSet& points, CenterMode mode = CenterMode::kMean);

// Symmetric squared-L2 Chamfer distance, mean-reduced on both sides.
double chamfer(const PointSet& a, const PointSet& b);

// Plain intersection-over-union of two axis-aligned boxes (0 when the union
// has zero volume and the boxes differ, 1 when they coincide).
double iou(const Box3D& a, const Box3D& b);

// Generalized IoU in (-1, 1]: IoU - (|C| - |A u B|) / |C| with C the minimal
// enclosing box. Degenerate rules: coincident zero-volume boxes -> 1;
// differing boxes with zero union volume use IoU = 0.
double giou(const Box3D& a, const Box3D& b);

// Rigid rotation about the z (up) axis.
PointSet rotate_about_up(const PointSet& points, double angle);
Vec3 rotate_about_up(const Vec3& p, double angle);

struct UnitTransform {
    Vec3 centroid{0.0, 0.0, 0.0};
    double scale = 1.0;
};

// Map points into [-1, 1]^3: subtract the given center, divide by the max
// absolute offset over all points and axes (isotropic). All points identical
// degenerates to scale 1. The returned transform inverts the map exactly.
std::pair<PointSet, UnitTransform> normalize_unit(const PointSet& points, const Vec3& center);

// Same, centered on the per-axis mean of the points.
std::pair<PointSet, UnitTransform> normalize_unit(const PointSet& points);

}  // namespace pointmode::geom
