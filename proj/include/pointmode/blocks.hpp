/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <vector>

#include "pointmode/geom.hpp"

namespace pointmode::blocks {

struct BlockConfig {
    int block_count = 8;    // blocks sampled per scene
    int block_points = 128; // nearest neighbors forming each block
};

// Blocks are index sets into a scene; block i's center index is always its
// own nearest member.
struct BlockSet {
    std::vector<int> center_indices;
    std::vector<std::vector<int>> member_indices;
    const geom::PointSet* scene = nullptr;

    geom::PointSet block_points(int i) const;
    geom::Vec3 center_point(int i) const;
    int count() const { return static_cast<int>(center_indices.size()); }
};

struct BlockTransform {
    geom::Vec3 center{0.0, 0.0, 0.0};
    double scale = 1.0;
    double rotation_angle = 0.0;
};

// A block mapped to object space: coordinates centered, isotropically scaled
// toward [-1,1], optionally rotated about the up axis. The transform inverts
// the mapping.
struct ObjectBlock {
    geom::PointSet points;
    BlockTransform transform;
};

// Distinct center indices drawn uniformly without replacement; each block is
// the centers' block_points nearest neighbors. Deterministic given seed.
BlockSet sample_blocks(const geom::PointSet& scene, const BlockConfig& cfg, std::uint64_t rng_seed);

// Per-block axis-aligned box over the block's scene-space points.
std::vector<geom::Box3D> gt_boxes(const BlockSet& bs, geom::CenterMode mode = geom::CenterMode::kMean);

// Ordered pipeline: subtract center, normalize, then (optionally) rotate by a
// uniform angle drawn from rng_seed. With strict_normalize the scale is the
// max x-y radius/|z| so rotation cannot push coordinates outside [-1,1];
// the default max-abs scale bounds x/y by sqrt(2) after rotation.
ObjectBlock to_object_space(const geom::PointSet& block_points, const geom::Vec3& center,
                            std::uint64_t rng_seed, bool rotate, bool strict_normalize = false);

// Inverse transform: unrotate, unscale, uncenter.
geom::PointSet to_scene_space(const ObjectBlock& block);

}  // namespace pointmode::blocks
