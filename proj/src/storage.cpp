/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/storage.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pointmode/config.hpp"

namespace pointmode::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

const std::array<std::uint32_t, 256> kCrcTable = make_crc_table();

}  // namespace

std::uint32_t crc32_bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint32_t c = 0xffffffffu;
    for (std::size_t i = 0; i < size; ++i) c = kCrcTable[(c ^ p[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

std::uint32_t crc32_file(const std::string& path) {
    const std::string bytes = read_file(path);
    return crc32_bytes(bytes.data(), bytes.size());
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("write_file_atomic: cannot open '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write_file_atomic: short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_file: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void save_points_text(const std::string& path, const geom::PointSet& points) {
    std::string out;
    out.reserve(points.size() * 40);
    char buf[96];
    for (const geom::Vec3& p : points) {
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", static_cast<double>(static_cast<float>(p[0])),
                      static_cast<double>(static_cast<float>(p[1])), static_cast<double>(static_cast<float>(p[2])));
        out += buf;
    }
    write_file_atomic(path, out);
}

geom::PointSet load_points_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_points_text: cannot open '" + path + "'");
    std::vector<geom::Vec3> pts;
    double x, y, z;
    // the format carries f32 coordinates; snap through float so text and
    // binary loads agree exactly
    while (in >> x >> y >> z)
        pts.push_back({static_cast<double>(static_cast<float>(x)), static_cast<double>(static_cast<float>(y)),
                       static_cast<double>(static_cast<float>(z))});
    if (pts.empty()) throw std::runtime_error("load_points_text: no points in '" + path + "'");
    return geom::PointSet(std::move(pts));
}

void save_points_binary(const std::string& path, const geom::PointSet& points) {
    std::string out;
    out.reserve(8 + points.size() * 12);
    out += "PMD1";
    const std::uint32_t n = static_cast<std::uint32_t>(points.size());
    out.append(reinterpret_cast<const char*>(&n), 4);
    for (const geom::Vec3& p : points) {
        for (int d = 0; d < 3; ++d) {
            const float f = static_cast<float>(p[d]);
            out.append(reinterpret_cast<const char*>(&f), 4);
        }
    }
    write_file_atomic(path, out);
}

geom::PointSet load_points_binary(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 8 || bytes.compare(0, 4, "PMD1") != 0)
        throw std::runtime_error("load_points_binary: '" + path + "' is not a PMD1 file");
    std::uint32_t n = 0;
    std::memcpy(&n, bytes.data() + 4, 4);
    if (bytes.size() != 8 + static_cast<std::size_t>(n) * 12)
        throw std::runtime_error("load_points_binary: '" + path + "' is truncated");
    std::vector<geom::Vec3> pts;
    pts.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        float f[3];
        std::memcpy(f, bytes.data() + 8 + static_cast<std::size_t>(i) * 12, 12);
        pts.push_back({static_cast<double>(f[0]), static_cast<double>(f[1]), static_cast<double>(f[2])});
    }
    return geom::PointSet(std::move(pts));
}

namespace dataset {

namespace {

json box_to_json(const geom::Box3D& b) {
    return json{{"center", {b.center[0], b.center[1], b.center[2]}}, {"half", {b.half[0], b.half[1], b.half[2]}}};
}

geom::Box3D box_from_json(const json& j) {
    geom::Box3D b;
    for (int d = 0; d < 3; ++d) {
        b.center[d] = j.at("center").at(d).get<double>();
        b.half[d] = j.at("half").at(d).get<double>();
    }
    return b;
}

struct ManifestEntry {
    std::string rel_path;
    std::uint64_t bytes;
    std::uint32_t crc;
};

std::string scene_base(std::uint64_t seed) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%06llu", static_cast<unsigned long long>(seed));
    return buf;
}

std::string shape_base(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "shape_%05d", index);
    return buf;
}

void verify_against_manifest(const std::string& data_dir, const std::string& rel_path, const json& manifest) {
    const json& files = manifest.at("files");
    auto it = files.find(rel_path);
    if (it == files.end())
        throw std::runtime_error("dataset: file '" + rel_path + "' not listed in manifest");
    const std::string full = (fs::path(data_dir) / rel_path).string();
    const std::uint32_t crc = crc32_file(full);
    if (crc != it->at("crc32").get<std::uint32_t>())
        throw std::runtime_error("dataset: checksum mismatch for '" + rel_path + "' (corrupt file)");
}

json load_manifest(const std::string& data_dir) {
    const std::string path = (fs::path(data_dir) / "manifest.json").string();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("dataset: missing manifest '" + path + "'");
    json j;
    in >> j;
    return j;
}

}  // namespace

void write(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<ManifestEntry> entries;

    auto emit = [&](const std::string& rel_path, const std::string& bytes) {
        const std::string full = (fs::path(out_dir) / rel_path).string();
        write_file_atomic(full, bytes);
        entries.push_back({rel_path, bytes.size(), crc32_bytes(bytes.data(), bytes.size())});
    };

    const auto& sg = cfg.scenegen;
    const std::uint64_t base = sg.scene_seed_base;
    const gen::SeedRange train_r{base, base + static_cast<std::uint64_t>(sg.train_scenes)};
    const gen::SeedRange val_r{train_r.end, train_r.end + static_cast<std::uint64_t>(sg.val_scenes)};
    const gen::SeedRange test_r{val_r.end, val_r.end + static_cast<std::uint64_t>(sg.test_scenes)};

    struct SplitDef {
        const char* name;
        gen::SeedRange range;
    };
    for (const SplitDef& split : {SplitDef{"train", train_r}, SplitDef{"val", val_r}, SplitDef{"test", test_r}}) {
        for (std::uint64_t seed = split.range.begin; seed < split.range.end; ++seed) {
            const gen::Scene scene = gen::gen_scene(sg.spec, seed);
            const std::string rel_base = std::string("scenes/") + split.name + "/" + scene_base(seed);

            std::string pts_bytes;
            pts_bytes += "PMD1";
            const std::uint32_t n = static_cast<std::uint32_t>(scene.points.size());
            pts_bytes.append(reinterpret_cast<const char*>(&n), 4);
            for (const geom::Vec3& p : scene.points) {
                for (int d = 0; d < 3; ++d) {
                    const float f = static_cast<float>(p[d]);
                    pts_bytes.append(reinterpret_cast<const char*>(&f), 4);
                }
            }
            emit(rel_base + ".pmd", pts_bytes);

            json meta;
            meta["seed"] = scene.seed;
            meta["placed"] = json::array();
            for (const gen::PlacedObject& po : scene.placed) {
                meta["placed"].push_back(json{{"class", gen::shape_class_name(po.cls)},
                                              {"gt_box", box_to_json(po.gt_box)},
                                              {"first_point", po.first_point},
                                              {"point_count", po.point_count}});
            }
            emit(rel_base + ".json", meta.dump(2) + "\n");
        }
    }

    struct ShapeSplit {
        const char* name;
        int count;
        std::uint64_t seed_base;
    };
    const ShapeSplit shape_splits[3] = {
        {"train", sg.train_shapes, sg.shape_seed_base},
        {"val", sg.val_shapes, sg.shape_seed_base + static_cast<std::uint64_t>(sg.train_shapes)},
        {"test", sg.test_shapes,
         sg.shape_seed_base + static_cast<std::uint64_t>(sg.train_shapes) + static_cast<std::uint64_t>(sg.val_shapes)},
    };
    for (const ShapeSplit& split : shape_splits) {
        const std::vector<gen::LabeledShape> shapes = gen::gen_labeled_shapes(split.count, sg.shape_points, split.seed_base);
        json labels = json::array();
        for (int i = 0; i < static_cast<int>(shapes.size()); ++i) {
            const std::string rel = std::string("shapes/") + split.name + "/" + shape_base(i) + ".pmd";
            std::string bytes;
            bytes += "PMD1";
            const std::uint32_t n = static_cast<std::uint32_t>(shapes[i].points.size());
            bytes.append(reinterpret_cast<const char*>(&n), 4);
            for (const geom::Vec3& p : shapes[i].points) {
                for (int d = 0; d < 3; ++d) {
                    const float f = static_cast<float>(p[d]);
                    bytes.append(reinterpret_cast<const char*>(&f), 4);
                }
            }
            emit(rel, bytes);
            labels.push_back(json{{"file", shape_base(i) + ".pmd"},
                                  {"class", gen::shape_class_name(shapes[i].label)},
                                  {"seed", shapes[i].seed}});
        }
        emit(std::string("shapes/") + split.name + "/labels.json", labels.dump(2) + "\n");
    }

    json manifest;
    manifest["format_version"] = 1;
    manifest["config"] = to_json(cfg);
    manifest["scene_seed_ranges"] = {{"train", {train_r.begin, train_r.end}},
                                     {"val", {val_r.begin, val_r.end}},
                                     {"test", {test_r.begin, test_r.end}}};
    json files = json::object();
    for (const ManifestEntry& e : entries) files[e.rel_path] = {{"bytes", e.bytes}, {"crc32", e.crc}};
    manifest["files"] = std::move(files);
    write_file_atomic((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

std::vector<gen::Scene> load_scenes(const std::string& data_dir, const std::string& split) {
    const json manifest = load_manifest(data_dir);
    const json& ranges = manifest.at("scene_seed_ranges").at(split);
    const std::uint64_t begin = ranges.at(0).get<std::uint64_t>();
    const std::uint64_t end = ranges.at(1).get<std::uint64_t>();

    std::vector<gen::Scene> out;
    out.reserve(end - begin);
    for (std::uint64_t seed = begin; seed < end; ++seed) {
        const std::string rel_base = "scenes/" + split + "/" + scene_base(seed);
        verify_against_manifest(data_dir, rel_base + ".pmd", manifest);
        verify_against_manifest(data_dir, rel_base + ".json", manifest);

        gen::Scene scene;
        scene.points = load_points_binary((fs::path(data_dir) / (rel_base + ".pmd")).string());
        json meta;
        std::ifstream meta_in(fs::path(data_dir) / (rel_base + ".json"));
        meta_in >> meta;
        scene.seed = meta.at("seed").get<std::uint64_t>();
        for (const json& po : meta.at("placed")) {
            gen::PlacedObject rec;
            rec.cls = gen::shape_class_from_name(po.at("class").get<std::string>());
            rec.gt_box = box_from_json(po.at("gt_box"));
            rec.first_point = po.at("first_point").get<int>();
            rec.point_count = po.at("point_count").get<int>();
            scene.placed.push_back(rec);
        }
        out.push_back(std::move(scene));
    }
    return out;
}

std::vector<gen::LabeledShape> load_shapes(const std::string& data_dir, const std::string& split) {
    const json manifest = load_manifest(data_dir);
    const std::string labels_rel = "shapes/" + split + "/labels.json";
    verify_against_manifest(data_dir, labels_rel, manifest);
    json labels;
    {
        std::ifstream in(fs::path(data_dir) / labels_rel);
        in >> labels;
    }
    std::vector<gen::LabeledShape> out;
    out.reserve(labels.size());
    for (const json& entry : labels) {
        const std::string rel = "shapes/" + split + "/" + entry.at("file").get<std::string>();
        verify_against_manifest(data_dir, rel, manifest);
        gen::LabeledShape shape;
        shape.points = load_points_binary((fs::path(data_dir) / rel).string());
        shape.label = gen::shape_class_from_name(entry.at("class").get<std::string>());
        shape.seed = entry.at("seed").get<std::uint64_t>();
        out.push_back(std::move(shape));
    }
    return out;
}

std::string manifest_config_json(const std::string& data_dir) {
    return load_manifest(data_dir).at("config").dump();
}

}  // namespace dataset

}  // namespace pointmode::io
