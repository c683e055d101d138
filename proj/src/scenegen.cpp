/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/scenegen.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pointmode/rng.hpp"

namespace pointmode::gen {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kCylinderRadius = 0.7;
constexpr double kConeBaseRadius = 0.9;

geom::Vec3 sample_box_surface(Rng& rng) {
    const int face = static_cast<int>(rng.uniform_int(6));
    const int axis = face / 2;
    const double sign = (face % 2 == 0) ? -1.0 : 1.0;
    geom::Vec3 p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    p[axis] = sign;
    return p;
}

geom::Vec3 sample_sphere_surface(Rng& rng) {
    for (;;) {
        const geom::Vec3 g{rng.normal(), rng.normal(), rng.normal()};
        const double n = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        if (n > 1e-12) return {g[0] / n, g[1] / n, g[2] / n};
    }
}

geom::Vec3 sample_cylinder_surface(Rng& rng) {
    const double r = kCylinderRadius;
    const double lateral_area = 2.0 * kPi * r * 2.0;
    const double cap_area = 2.0 * kPi * r * r;
    const double theta = rng.uniform(0.0, 2.0 * kPi);
    if (rng.uniform() < lateral_area / (lateral_area + cap_area)) {
        return {r * std::cos(theta), r * std::sin(theta), rng.uniform(-1.0, 1.0)};
    }
    const double rho = r * std::sqrt(rng.uniform());
    const double z = rng.uniform() < 0.5 ? -1.0 : 1.0;
    return {rho * std::cos(theta), rho * std::sin(theta), z};
}

geom::Vec3 sample_cone_surface(Rng& rng) {
    // Apex at (0,0,1), circular base of radius kConeBaseRadius at z = -1.
    const double r = kConeBaseRadius;
    const double slant = std::sqrt(4.0 + r * r);
    const double lateral_area = kPi * r * slant;
    const double base_area = kPi * r * r;
    const double theta = rng.uniform(0.0, 2.0 * kPi);
    if (rng.uniform() < lateral_area / (lateral_area + base_area)) {
        const double t = std::sqrt(rng.uniform());  // area-uniform along the slant
        const double rho = r * t;
        return {rho * std::cos(theta), rho * std::sin(theta), 1.0 - 2.0 * t};
    }
    const double rho = r * std::sqrt(rng.uniform());
    return {rho * std::cos(theta), rho * std::sin(theta), -1.0};
}

geom::Vec3 sample_surface(ShapeClass cls, Rng& rng) {
    switch (cls) {
        case ShapeClass::kBoxSurface: return sample_box_surface(rng);
        case ShapeClass::kSphereSurface: return sample_sphere_surface(rng);
        case ShapeClass::kCylinderSurface: return sample_cylinder_surface(rng);
        case ShapeClass::kConeSurface: return sample_cone_surface(rng);
    }
    throw std::invalid_argument("sample_surface: unknown shape class");
}

}  // namespace

const char* shape_class_name(ShapeClass cls) {
    switch (cls) {
        case ShapeClass::kBoxSurface: return "box_surface";
        case ShapeClass::kSphereSurface: return "sphere_surface";
        case ShapeClass::kCylinderSurface: return "cylinder_surface";
        case ShapeClass::kConeSurface: return "cone_surface";
    }
    throw std::invalid_argument("shape_class_name: unknown shape class");
}

ShapeClass shape_class_from_name(const std::string& name) {
    for (int i = 0; i < kShapeClassCount; ++i) {
        if (name == shape_class_name(static_cast<ShapeClass>(i))) return static_cast<ShapeClass>(i);
    }
    throw std::invalid_argument("shape_class_from_name: unknown class '" + name + "'");
}

geom::PointSet gen_shape(ShapeClass cls, int n, std::uint64_t seed) {
    if (n < 8) throw std::invalid_argument("gen_shape: need at least 8 points, got " + std::to_string(n));
    Rng rng = Rng::fork(seed, 0x73686170ull + static_cast<std::uint64_t>(cls));
    std::vector<geom::Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) pts.push_back(sample_surface(cls, rng));
    return geom::PointSet(std::move(pts));
}

Scene gen_scene(const SceneSpec& spec, std::uint64_t seed) {
    Rng place_rng = Rng::fork(seed, 1);
    Rng surface_rng = Rng::fork(seed, 2);
    Rng clutter_rng = Rng::fork(seed, 3);

    const int n_objects =
        spec.objects_min +
        (spec.objects_max > spec.objects_min
             ? static_cast<int>(place_rng.uniform_int(static_cast<std::uint64_t>(spec.objects_max - spec.objects_min + 1)))
             : 0);
    const int object_total = static_cast<int>(std::lround(spec.scene_points * (1.0 - spec.clutter_ratio)));
    if (n_objects > 0 && object_total < n_objects * 8)
        throw std::invalid_argument("gen_scene: scene_points too small for the requested objects");

    struct Placement {
        ShapeClass cls;
        double scale;
        geom::Vec3 center;
    };
    std::vector<Placement> placements;
    const double half_room = spec.extent_xy / 2.0;
    for (int i = 0; i < n_objects; ++i) {
        const ShapeClass cls = static_cast<ShapeClass>(place_rng.uniform_int(kShapeClassCount));
        const double scale = place_rng.uniform(0.4, 0.9);
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            const double margin = scale + 0.1;
            const geom::Vec3 center{place_rng.uniform(-half_room + margin, half_room - margin),
                                    place_rng.uniform(-half_room + margin, half_room - margin), scale};
            bool ok = true;
            for (const Placement& other : placements) {
                const double min_gap = 1.05 * (scale + other.scale);
                if (std::abs(center[0] - other.center[0]) < min_gap &&
                    std::abs(center[1] - other.center[1]) < min_gap) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                placements.push_back({cls, scale, center});
                placed = true;
            }
        }
        if (!placed) throw std::runtime_error("gen_scene: could not place object " + std::to_string(i) +
                                              " after bounded retries (seed " + std::to_string(seed) + ")");
    }

    std::vector<geom::Vec3> points;
    points.reserve(spec.scene_points);
    std::vector<PlacedObject> placed_objects;
    placed_objects.reserve(placements.size());

    for (std::size_t i = 0; i < placements.size(); ++i) {
        const Placement& pl = placements[i];
        int count = n_objects > 0 ? object_total / n_objects : 0;
        if (static_cast<int>(i) < object_total % n_objects) ++count;
        std::vector<geom::Vec3> obj_pts;
        obj_pts.reserve(count);
        for (int k = 0; k < count; ++k) {
            const geom::Vec3 s = sample_surface(pl.cls, surface_rng);
            obj_pts.push_back(pl.center + s * pl.scale);
        }
        PlacedObject rec;
        rec.cls = pl.cls;
        rec.gt_box = geom::aabb_params(geom::PointSet(obj_pts), geom::CenterMode::kMidpoint);
        rec.first_point = static_cast<int>(points.size());
        rec.point_count = count;
        placed_objects.push_back(rec);
        points.insert(points.end(), obj_pts.begin(), obj_pts.end());
    }

    const int clutter_total = spec.scene_points - static_cast<int>(points.size());
    const int floor_count = static_cast<int>(std::lround(clutter_total * 0.6));
    for (int k = 0; k < clutter_total; ++k) {
        if (k < floor_count) {
            points.push_back({clutter_rng.uniform(-half_room, half_room),
                              clutter_rng.uniform(-half_room, half_room),
                              std::abs(clutter_rng.normal(0.0, 0.02))});
        } else {
            const int wall = static_cast<int>(clutter_rng.uniform_int(4));
            const double along = clutter_rng.uniform(-half_room, half_room);
            const double height = clutter_rng.uniform(0.0, spec.extent_z);
            const double inward = std::abs(clutter_rng.normal(0.0, 0.05));
            switch (wall) {
                case 0: points.push_back({-half_room + inward, along, height}); break;
                case 1: points.push_back({half_room - inward, along, height}); break;
                case 2: points.push_back({along, -half_room + inward, height}); break;
                default: points.push_back({along, half_room - inward, height}); break;
            }
        }
    }

    Scene scene;
    scene.points = geom::PointSet(std::move(points));
    scene.placed = std::move(placed_objects);
    scene.seed = seed;
    return scene;
}

Splits make_splits(const SceneSpec& spec, SeedRange train, SeedRange val, SeedRange test) {
    const SeedRange ranges[3] = {train, val, test};
    for (const SeedRange& r : ranges) {
        if (r.end < r.begin) throw std::invalid_argument("make_splits: seed range end before begin");
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
            const bool disjoint = ranges[i].end <= ranges[j].begin || ranges[j].end <= ranges[i].begin;
            if (!disjoint && ranges[i].begin != ranges[i].end && ranges[j].begin != ranges[j].end)
                throw std::invalid_argument("make_splits: seed ranges overlap");
        }
    }
    Splits out;
    auto fill = [&spec](std::vector<Scene>& dst, SeedRange r) {
        dst.reserve(static_cast<std::size_t>(r.end - r.begin));
        for (std::uint64_t s = r.begin; s < r.end; ++s) dst.push_back(gen_scene(spec, s));
    };
    fill(out.train, train);
    fill(out.val, val);
    fill(out.test, test);
    return out;
}

std::vector<LabeledShape> gen_labeled_shapes(int count, int points_per_shape, std::uint64_t seed_base) {
    std::vector<LabeledShape> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const ShapeClass cls = static_cast<ShapeClass>(i % kShapeClassCount);
        const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(i);
        geom::PointSet pts = gen_shape(cls, points_per_shape, seed);
        Rng rot = Rng::fork(seed, 0x726f74ull);
        out.push_back({geom::rotate_about_up(pts, rot.uniform(0.0, 2.0 * kPi)), cls, seed});
    }
    return out;
}

}  // namespace pointmode::gen
