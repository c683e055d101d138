/* SPDX-License-Identifier: Apache-2.0 */
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "pointmode/blocks.hpp"
#include "pointmode/rng.hpp"
#include "pointmode/scenegen.hpp"

using namespace pointmode;
using blocks::BlockConfig;

namespace {

geom::PointSet random_scene(Rng& rng, int n) {
    std::vector<geom::Vec3> pts;
    for (int i = 0; i < n; ++i)
        pts.push_back({rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(0, 3)});
    return geom::PointSet(std::move(pts));
}

}  // namespace

TEST_CASE("sample_blocks basic contracts") {
    Rng rng(31);
    const geom::PointSet scene = random_scene(rng, 200);
    const BlockConfig cfg{6, 24};
    const blocks::BlockSet bs = blocks::sample_blocks(scene, cfg, 77);

    CHECK(bs.count() == 6);
    std::set<int> centers(bs.center_indices.begin(), bs.center_indices.end());
    CHECK(centers.size() == 6);  // distinct, drawn without replacement

    for (int i = 0; i < bs.count(); ++i) {
        CHECK(bs.member_indices[i].size() == 24);
        // the center is its own nearest member
        CHECK(bs.member_indices[i][0] == bs.center_indices[i]);
        for (int idx : bs.member_indices[i]) {
            CHECK(idx >= 0);
            CHECK(idx < 200);
        }
    }
}

TEST_CASE("single block covering the whole scene") {
    Rng rng(32);
    const geom::PointSet scene = random_scene(rng, 32);
    const blocks::BlockSet bs = blocks::sample_blocks(scene, {1, 32}, 5);
    std::set<int> members(bs.member_indices[0].begin(), bs.member_indices[0].end());
    CHECK(members.size() == 32);
}

TEST_CASE("sample_blocks determinism and validation") {
    Rng rng(33);
    const geom::PointSet scene = random_scene(rng, 100);
    const blocks::BlockSet a = blocks::sample_blocks(scene, {4, 16}, 9);
    const blocks::BlockSet b = blocks::sample_blocks(scene, {4, 16}, 9);
    CHECK(a.center_indices == b.center_indices);
    CHECK(a.member_indices == b.member_indices);

    CHECK_THROWS_AS(blocks::sample_blocks(scene, {101, 16}, 0), std::invalid_argument);
    CHECK_THROWS_AS(blocks::sample_blocks(scene, {4, 101}, 0), std::invalid_argument);
}

TEST_CASE("gt_boxes per-block examples") {
    const geom::PointSet scene({{0, 0, 0}, {2, 4, 6}, {9, 9, 9}, {9.1, 9, 9}});
    blocks::BlockSet bs;
    bs.scene = &scene;
    bs.center_indices = {0, 2};
    bs.member_indices = {{0, 1}, {2, 3}};

    const auto boxes = blocks::gt_boxes(bs, geom::CenterMode::kMean);
    CHECK(boxes[0].center == geom::Vec3{1, 2, 3});
    CHECK(boxes[0].half == geom::Vec3{1, 2, 3});

    // identical points collapse to a zero-extent box
    const geom::PointSet dup({{1, 1, 1}, {1, 1, 1}});
    blocks::BlockSet bs2;
    bs2.scene = &dup;
    bs2.center_indices = {0};
    bs2.member_indices = {{0, 1}};
    const auto zb = blocks::gt_boxes(bs2);
    CHECK(zb[0].half == geom::Vec3{0, 0, 0});
    CHECK(zb[0].center == geom::Vec3{1, 1, 1});
}

TEST_CASE("gt_boxes invariant to member permutation and local to the block") {
    Rng rng(34);
    const geom::PointSet scene = random_scene(rng, 60);
    blocks::BlockSet bs = blocks::sample_blocks(scene, {3, 20}, 4);
    const auto boxes = blocks::gt_boxes(bs);

    blocks::BlockSet shuffled = bs;
    for (auto& members : shuffled.member_indices) rng.shuffle(members);
    const auto boxes2 = blocks::gt_boxes(shuffled);
    for (int i = 0; i < 3; ++i) {
        for (int d = 0; d < 3; ++d) {
            CHECK(boxes[i].center[d] == doctest::Approx(boxes2[i].center[d]).epsilon(1e-12));
            CHECK(boxes[i].half[d] == boxes2[i].half[d]);
        }
    }

    // changing another block's membership leaves box i untouched
    blocks::BlockSet altered = bs;
    altered.member_indices[2] = bs.member_indices[1];
    const auto boxes3 = blocks::gt_boxes(altered);
    for (int d = 0; d < 3; ++d) CHECK(boxes3[0].center[d] == boxes[0].center[d]);
}

TEST_CASE("to_object_space without rotation reproduces normalize_unit") {
    const geom::PointSet two({{1, 1, 1}, {3, 3, 3}});
    const blocks::ObjectBlock ob = blocks::to_object_space(two, {2, 2, 2}, 0, false);
    CHECK(ob.points[0] == geom::Vec3{-1, -1, -1});
    CHECK(ob.points[1] == geom::Vec3{1, 1, 1});
    CHECK(ob.transform.scale == 1.0);
    CHECK(ob.transform.rotation_angle == 0.0);
}

TEST_CASE("to_object_space roundtrips to scene coordinates") {
    Rng rng(35);
    const geom::PointSet scene = random_scene(rng, 150);
    const blocks::BlockSet bs = blocks::sample_blocks(scene, {4, 30}, 11);
    for (int i = 0; i < bs.count(); ++i) {
        const geom::PointSet pts = bs.block_points(i);
        for (const bool rotate : {false, true}) {
            const blocks::ObjectBlock ob = blocks::to_object_space(pts, bs.center_point(i), 123 + i, rotate);
            const geom::PointSet back = blocks::to_scene_space(ob);
            for (std::size_t p = 0; p < pts.size(); ++p)
                for (int d = 0; d < 3; ++d) CHECK(back[p][d] == doctest::Approx(pts[p][d]).epsilon(1e-6));
        }
    }
}

TEST_CASE("rotation preserves pairwise distances") {
    Rng rng(36);
    const geom::PointSet scene = random_scene(rng, 80);
    const blocks::BlockSet bs = blocks::sample_blocks(scene, {1, 40}, 3);
    const geom::PointSet pts = bs.block_points(0);
    const blocks::ObjectBlock plain = blocks::to_object_space(pts, bs.center_point(0), 7, false);
    const blocks::ObjectBlock rotated = blocks::to_object_space(pts, bs.center_point(0), 7, true);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            CHECK(oracles::sqdist(plain.points[i], plain.points[j]) ==
                  doctest::Approx(oracles::sqdist(rotated.points[i], rotated.points[j])).epsilon(1e-9));
}

TEST_CASE("object-space coordinates are decoupled from scene position") {
    // the same local geometry at two different scene positions
    std::vector<geom::Vec3> shape;
    Rng rng(37);
    for (int i = 0; i < 20; ++i) shape.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});

    const geom::Vec3 offset_a{10, -3, 2}, offset_b{-55, 40, 7};
    std::vector<geom::Vec3> at_a, at_b;
    for (const geom::Vec3& p : shape) {
        at_a.push_back(p + offset_a);
        at_b.push_back(p + offset_b);
    }
    const blocks::ObjectBlock a = blocks::to_object_space(geom::PointSet(at_a), offset_a, 0, false);
    const blocks::ObjectBlock b = blocks::to_object_space(geom::PointSet(at_b), offset_b, 0, false);
    for (std::size_t i = 0; i < shape.size(); ++i)
        for (int d = 0; d < 3; ++d) CHECK(a.points[i][d] == doctest::Approx(b.points[i][d]).epsilon(1e-9));
}

TEST_CASE("normalization bounds: default vs strict under rotation") {
    Rng rng(38);
    std::vector<geom::Vec3> pts;
    for (int i = 0; i < 50; ++i) pts.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
    const geom::PointSet block(pts);
    const geom::Vec3 center{0, 0, 0};

    for (int seed = 0; seed < 20; ++seed) {
        const blocks::ObjectBlock loose = blocks::to_object_space(block, center, seed, true, false);
        for (const geom::Vec3& p : loose.points) {
            CHECK(std::abs(p[0]) <= std::numbers::sqrt2 + 1e-12);
            CHECK(std::abs(p[1]) <= std::numbers::sqrt2 + 1e-12);
            CHECK(std::abs(p[2]) <= 1.0 + 1e-12);
        }
        const blocks::ObjectBlock strict = blocks::to_object_space(block, center, seed, true, true);
        for (const geom::Vec3& p : strict.points)
            for (double c : p) CHECK(std::abs(c) <= 1.0 + 1e-12);
    }
}

TEST_CASE("degenerate all-identical block uses scale 1") {
    const geom::PointSet dup({{5, 5, 5}, {5, 5, 5}, {5, 5, 5}});
    const blocks::ObjectBlock ob = blocks::to_object_space(dup, {5, 5, 5}, 0, false);
    CHECK(ob.transform.scale == 1.0);
    for (const geom::Vec3& p : ob.points) CHECK(p == geom::Vec3{0, 0, 0});
}
