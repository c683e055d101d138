/* SPDX-License-Identifier: Apache-2.0 */
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pointmode/geom.hpp"
#include "pointmode/rng.hpp"

using namespace pointmode;
using geom::Box3D;
using geom::PointSet;
using geom::Vec3;

namespace {

PointSet random_points(Rng& rng, int n, double lo = -3.0, double hi = 3.0) {
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) pts.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)});
    return PointSet(std::move(pts));
}

}  // namespace

TEST_CASE("pointset rejects empty and non-finite input") {
    CHECK_THROWS_AS(PointSet(std::vector<Vec3>{}), std::invalid_argument);
    CHECK_THROWS_AS(PointSet({{0.0, std::nan(""), 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(PointSet({{0.0, 0.0, std::numeric_limits<double>::infinity()}}), std::invalid_argument);
}

TEST_CASE("fps collinear example") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({static_cast<double>(i), 0.0, 0.0});
    const PointSet ps(std::move(pts));
    // indices 4 and 5 tie at min distance 4; lowest index wins
    CHECK(geom::fps(ps, 3, 0) == std::vector<int>{0, 9, 4});
}

TEST_CASE("fps identity and exhaustion cases") {
    Rng rng(3);
    const PointSet ps = random_points(rng, 12);
    CHECK(geom::fps(ps, 1, 7) == std::vector<int>{7});
    std::vector<int> all = geom::fps(ps, 12, 2);
    std::sort(all.begin(), all.end());
    for (int i = 0; i < 12; ++i) CHECK(all[i] == i);
}

TEST_CASE("fps argument validation") {
    Rng rng(4);
    const PointSet ps = random_points(rng, 5);
    CHECK_THROWS_AS(geom::fps(ps, 6, 0), std::invalid_argument);
    CHECK_THROWS_AS(geom::fps(ps, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(geom::fps(ps, 3, 5), std::invalid_argument);
    CHECK_THROWS_AS(geom::fps(ps, 3, -1), std::invalid_argument);
}

TEST_CASE("fps matches brute-force oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(63));
        const int m = 1 + static_cast<int>(rng.uniform_int(n));
        const int seed = static_cast<int>(rng.uniform_int(n));
        const PointSet ps = random_points(rng, n);
        CHECK(geom::fps(ps, m, seed) == oracles::fps_brute(ps, m, seed));
    }
}

TEST_CASE("knn basic cases") {
    const PointSet axis({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}});
    CHECK(geom::knn(axis, {0, 0, 0}, 2) == std::vector<int>{0, 1});
    CHECK(geom::knn(axis, {2, 0, 0}, 1) == std::vector<int>{2});
    CHECK_THROWS_AS(geom::knn(axis, {0, 0, 0}, 5), std::invalid_argument);
}

TEST_CASE("knn matches brute-force oracle") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(64));
        const int k = 1 + static_cast<int>(rng.uniform_int(n));
        const PointSet ps = random_points(rng, n);
        const Vec3 q{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
        CHECK(geom::knn(ps, q, k) == oracles::knn_brute(ps, q, k));
    }
}

TEST_CASE("aabb_params mean and midpoint") {
    const PointSet two({{0, 0, 0}, {2, 4, 6}});
    const Box3D b = geom::aabb_params(two, geom::CenterMode::kMean);
    CHECK(b.center == Vec3{1, 2, 3});
    CHECK(b.half == Vec3{1, 2, 3});

    const PointSet ps({{0, 0, 0}, {0, 0, 0}, {3, 0, 0}});
    const Box3D mean_box = geom::aabb_params(ps, geom::CenterMode::kMean);
    CHECK(mean_box.center[0] == doctest::Approx(1.0));
    CHECK(mean_box.half[0] == doctest::Approx(1.5));
    // paper-literal box [-0.5, 2.5] does not enclose x=3
    CHECK(mean_box.center[0] + mean_box.half[0] < 3.0);
    const Box3D mid_box = geom::aabb_params(ps, geom::CenterMode::kMidpoint);
    CHECK(mid_box.center[0] == doctest::Approx(1.5));
    CHECK(mid_box.center[0] + mid_box.half[0] >= 3.0);

    const PointSet single({{0.5, -1.5, 2.0}});
    const Box3D sb = geom::aabb_params(single);
    CHECK(sb.center == Vec3{0.5, -1.5, 2.0});
    CHECK(sb.half == Vec3{0, 0, 0});
}

TEST_CASE("aabb_params invariant under permutation") {
    Rng rng(13);
    const PointSet ps = random_points(rng, 20);
    std::vector<Vec3> shuffled(ps.points());
    rng.shuffle(shuffled);
    const Box3D a = geom::aabb_params(ps);
    const Box3D b = geom::aabb_params(PointSet(shuffled));
    for (int d = 0; d < 3; ++d) {
        CHECK(a.half[d] >= 0.0);
        CHECK(a.center[d] == doctest::Approx(b.center[d]).epsilon(1e-12));
        CHECK(a.half[d] == b.half[d]);
    }
}

TEST_CASE("box corners are the documented sign combinations") {
    const Box3D b = geom::make_box({1, 2, 3}, {0.5, 1.0, 1.5});
    const auto corners = b.corners();
    CHECK(corners[0] == Vec3{0.5, 1.0, 1.5});
    CHECK(corners[1] == Vec3{1.5, 1.0, 1.5});
    CHECK(corners[2] == Vec3{0.5, 3.0, 1.5});
    CHECK(corners[7] == Vec3{1.5, 3.0, 4.5});
    CHECK_THROWS_AS(geom::make_box({0, 0, 0}, {-0.1, 0, 0}), std::invalid_argument);
}

TEST_CASE("chamfer examples") {
    const PointSet a({{0, 0, 0}});
    const PointSet b({{1, 0, 0}});
    CHECK(geom::chamfer(a, b) == doctest::Approx(2.0));
    Rng rng(5);
    const PointSet c = random_points(rng, 6);
    CHECK(geom::chamfer(c, c) == 0.0);
}

TEST_CASE("chamfer equals brute-force oracle exactly") {
    Rng rng(14);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(8));
        const int m = 1 + static_cast<int>(rng.uniform_int(8));
        const PointSet a = random_points(rng, n);
        const PointSet b = random_points(rng, m);
        CHECK(geom::chamfer(a, b) == oracles::chamfer_brute(a, b));
        CHECK(geom::chamfer(a, b) == geom::chamfer(b, a));
    }
}

TEST_CASE("chamfer invariant under permutations") {
    Rng rng(15);
    const PointSet a = random_points(rng, 10);
    const PointSet b = random_points(rng, 7);
    std::vector<Vec3> ap(a.points()), bp(b.points());
    rng.shuffle(ap);
    rng.shuffle(bp);
    CHECK(geom::chamfer(a, b) == doctest::Approx(geom::chamfer(PointSet(ap), PointSet(bp))).epsilon(1e-15));
}

TEST_CASE("giou hand-computed values") {
    const Box3D unit0 = geom::make_box({0, 0, 0}, {1, 1, 1});
    CHECK(geom::giou(unit0, unit0) == 1.0);
    const Box3D unit1 = geom::make_box({1, 0, 0}, {1, 1, 1});
    CHECK(geom::giou(unit0, unit1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    const Box3D far_box = geom::make_box({4, 0, 0}, {1, 1, 1});
    CHECK(geom::giou(unit0, far_box) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("giou degenerate rules") {
    const Box3D point_a = geom::make_box({1, 1, 1}, {0, 0, 0});
    const Box3D point_b = geom::make_box({2, 1, 1}, {0, 0, 0});
    CHECK(geom::giou(point_a, point_a) == 1.0);
    CHECK(geom::giou(point_a, point_b) == doctest::Approx(-1.0));
    CHECK(geom::iou(point_a, point_a) == 1.0);
    CHECK(geom::iou(point_a, point_b) == 0.0);
}

TEST_CASE("giou symmetry, translation invariance, iou bound") {
    Rng rng(16);
    for (int trial = 0; trial < 500; ++trial) {
        const Box3D a = geom::make_box({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)},
                                       {rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2)});
        const Box3D b = geom::make_box({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)},
                                       {rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2)});
        const double g = geom::giou(a, b);
        CHECK(g == geom::giou(b, a));
        CHECK(g > -1.0);
        CHECK(g <= 1.0);
        CHECK(g <= geom::iou(a, b) + 1e-15);

        const Vec3 t{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const Box3D at = geom::make_box(a.center + t, a.half);
        const Box3D bt = geom::make_box(b.center + t, b.half);
        CHECK(geom::giou(at, bt) == doctest::Approx(g).epsilon(1e-9));
    }
}

TEST_CASE("rotate_about_up is an isometry") {
    const PointSet p({{1, 0, 0}});
    const PointSet r = geom::rotate_about_up(p, std::numbers::pi / 2.0);
    CHECK(r[0][0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r[0][1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r[0][2] == 0.0);

    Rng rng(17);
    const PointSet ps = random_points(rng, 15);
    const PointSet rot = geom::rotate_about_up(ps, rng.uniform(0, 6.28));
    for (std::size_t i = 0; i < ps.size(); ++i)
        for (std::size_t j = 0; j < ps.size(); ++j)
            CHECK(oracles::sqdist(rot[i], rot[j]) == doctest::Approx(oracles::sqdist(ps[i], ps[j])).epsilon(1e-9));

    const PointSet id = geom::rotate_about_up(ps, 0.0);
    for (std::size_t i = 0; i < ps.size(); ++i) CHECK(id[i] == ps[i]);
}

TEST_CASE("normalize_unit examples and roundtrip") {
    const PointSet two({{1, 1, 1}, {3, 3, 3}});
    const auto [normed, tf] = geom::normalize_unit(two, {2, 2, 2});
    CHECK(tf.scale == 1.0);
    CHECK(normed[0] == Vec3{-1, -1, -1});
    CHECK(normed[1] == Vec3{1, 1, 1});

    const PointSet single({{4, 5, 6}});
    const auto [sn, st] = geom::normalize_unit(single);
    CHECK(st.scale == 1.0);
    CHECK(sn[0] == Vec3{0, 0, 0});

    Rng rng(18);
    const PointSet ps = random_points(rng, 30, -10.0, 10.0);
    const auto [un, ut] = geom::normalize_unit(ps);
    double max_abs = 0.0;
    for (const Vec3& p : un)
        for (double c : p) max_abs = std::max(max_abs, std::abs(c));
    CHECK(max_abs <= 1.0 + 1e-15);
    CHECK(max_abs == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < ps.size(); ++i)
        for (int d = 0; d < 3; ++d)
            CHECK(un[i][d] * ut.scale + ut.centroid[d] == doctest::Approx(ps[i][d]).epsilon(1e-9));
}
