/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointmode/geom.hpp"

namespace pointmode::gen {

// Closed set of synthetic surface classes; index order is part of the data
// contract and must not change.
enum class ShapeClass : int {
    kBoxSurface = 0,
    kSphereSurface = 1,
    kCylinderSurface = 2,
    kConeSurface = 3,
};
inline constexpr int kShapeClassCount = 4;

const char* shape_class_name(ShapeClass cls);
ShapeClass shape_class_from_name(const std::string& name);

struct PlacedObject {
    ShapeClass cls = ShapeClass::kBoxSurface;
    geom::Box3D gt_box;  // midpoint-mode box of the object's sampled points
    int first_point = 0;
    int point_count = 0;
};

struct Scene {
    geom::PointSet points;
    std::vector<PlacedObject> placed;
    std::uint64_t seed = 0;
};

struct SceneSpec {
    int scene_points = 2048;
    double extent_xy = 8.0;  // room spans [-extent_xy/2, extent_xy/2] in x and y
    double extent_z = 3.0;
    int objects_min = 4;
    int objects_max = 8;
    double clutter_ratio = 0.25;  // fraction of points on floor/walls
};

// n points on the unit-scale surface of the class, centered at the origin,
// all coordinates in [-1, 1]. Pure function of (cls, n, seed).
geom::PointSet gen_shape(ShapeClass cls, int n, std::uint64_t seed);

// Scaled, translated, non-overlapping objects resting on the floor of a
// room, padded with floor and wall clutter to exactly scene_points points.
Scene gen_scene(const SceneSpec& spec, std::uint64_t seed);

struct SeedRange {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;  // exclusive
};

struct Splits {
    std::vector<Scene> train;
    std::vector<Scene> val;
    std::vector<Scene> test;
};

// One scene per seed in each range; ranges must be pairwise disjoint.
Splits make_splits(const SceneSpec& spec, SeedRange train, SeedRange val, SeedRange test);

struct LabeledShape {
    geom::PointSet points;
    ShapeClass label = ShapeClass::kBoxSurface;
    std::uint64_t seed = 0;
};

// Balanced, class-separable classification set: label = index mod 4, each
// shape resampled and randomly rotated about the up axis.
std::vector<LabeledShape> gen_labeled_shapes(int count, int points_per_shape, std::uint64_t seed_base);

}  // namespace pointmode::gen
