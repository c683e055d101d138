/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointmode/geom.hpp"
#include "pointmode/scenegen.hpp"

namespace pointmode::io {

std::uint32_t crc32_bytes(const void* data, std::size_t size);
std::uint32_t crc32_file(const std::string& path);

// Atomic write: temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

// Point cloud formats. Both carry 32-bit float coordinates:
//  - text: one "x y z" line per point, enough digits to round-trip f32;
//  - binary: magic "PMD1", little-endian u32 count, then f32 triplets.
void save_points_text(const std::string& path, const geom::PointSet& points);
geom::PointSet load_points_text(const std::string& path);
void save_points_binary(const std::string& path, const geom::PointSet& points);
geom::PointSet load_points_binary(const std::string& path);

struct RunConfig;  // config.hpp

// Dataset directory layout written by gen-data:
//   manifest.json
//   scenes/{train,val,test}/scene_<seed>.pmd + scene_<seed>.json
//   shapes/{train,val,test}/shape_<index>.pmd, labels.json
namespace dataset {

void write(const RunConfig& cfg, const std::string& out_dir);

// Loaders verify the manifest checksum of every file they read.
std::vector<gen::Scene> load_scenes(const std::string& data_dir, const std::string& split);
std::vector<gen::LabeledShape> load_shapes(const std::string& data_dir, const std::string& split);
std::string manifest_config_json(const std::string& data_dir);

}  // namespace dataset

}  // namespace pointmode::io
