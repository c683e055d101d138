/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pointmode/rng.hpp"

namespace pointmode::blocks {

geom::PointSet BlockSet::block_points(int i) const {
    std::vector<geom::Vec3> pts;
    pts.reserve(member_indices[i].size());
    for (int idx : member_indices[i]) pts.push_back((*scene)[idx]);
    return geom::PointSet(std::move(pts));
}

geom::Vec3 BlockSet::center_point(int i) const { return (*scene)[center_indices[i]]; }

BlockSet sample_blocks(const geom::PointSet& scene, const BlockConfig& cfg, std::uint64_t rng_seed) {
    const int n = static_cast<int>(scene.size());
    if (cfg.block_count < 1 || cfg.block_points < 1)
        throw std::invalid_argument("sample_blocks: block_count and block_points must be positive");
    if (n < std::max(cfg.block_count, cfg.block_points))
        throw std::invalid_argument("sample_blocks: scene has " + std::to_string(n) + " points, need at least " +
                                    std::to_string(std::max(cfg.block_count, cfg.block_points)));

    Rng rng = Rng::fork(rng_seed, 0x626c6f636bull);
    BlockSet bs;
    bs.scene = &scene;
    bs.center_indices = rng.sample_without_replacement(n, cfg.block_count);
    bs.member_indices.reserve(cfg.block_count);
    for (int c : bs.center_indices) bs.member_indices.push_back(geom::knn(scene, scene[c], cfg.block_points));
    return bs;
}

std::vector<geom::Box3D> gt_boxes(const BlockSet& bs, geom::CenterMode mode) {
    std::vector<geom::Box3D> out;
    out.reserve(bs.count());
    for (int i = 0; i < bs.count(); ++i) out.push_back(geom::aabb_params(bs.block_points(i), mode));
    return out;
}

ObjectBlock to_object_space(const geom::PointSet& block_points, const geom::Vec3& center,
                            std::uint64_t rng_seed, bool rotate, bool strict_normalize) {
    double scale = 0.0;
    if (strict_normalize) {
        for (const geom::Vec3& p : block_points) {
            const double dx = p[0] - center[0], dy = p[1] - center[1], dz = p[2] - center[2];
            scale = std::max(scale, std::max(std::sqrt(dx * dx + dy * dy), std::abs(dz)));
        }
    } else {
        for (const geom::Vec3& p : block_points) {
            for (int d = 0; d < 3; ++d) scale = std::max(scale, std::abs(p[d] - center[d]));
        }
    }
    if (scale == 0.0) scale = 1.0;

    std::vector<geom::Vec3> pts;
    pts.reserve(block_points.size());
    for (const geom::Vec3& p : block_points) pts.push_back((p - center) * (1.0 / scale));

    double angle = 0.0;
    if (rotate) {
        Rng rng = Rng::fork(rng_seed, 0x726f7461ull);
        angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    geom::PointSet object_pts(std::move(pts));
    if (rotate) object_pts = geom::rotate_about_up(object_pts, angle);
    return ObjectBlock{std::move(object_pts), BlockTransform{center, scale, angle}};
}

geom::PointSet to_scene_space(const ObjectBlock& block) {
    std::vector<geom::Vec3> pts;
    pts.reserve(block.points.size());
    for (const geom::Vec3& p : block.points) {
        const geom::Vec3 unrot = geom::rotate_about_up(p, -block.transform.rotation_angle);
        pts.push_back(unrot * block.transform.scale + block.transform.center);
    }
    return geom::PointSet(std::move(pts));
}

}  // namespace pointmode::blocks
