#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcc/common.hpp"
#include "pcc/mesh_io.hpp"
#include "pcc/sampling.hpp"
#include "pcc/serialize.hpp"

// Packed dataset file. Layout (little-endian):
//
//   magic "PCDS", u8 version, u32 P, u32 train count, u32 test count,
//   u16 class count, class names (u16 length + bytes each),
//   then train records followed by test records:
//     u8 label, P x 3 f32 coordinates
//
// Ingestion walks a ModelNet40-style tree (<class>/<train|test>/*.off),
// samples P surface points per mesh and normalizes to the unit sphere.
// Per-file seeds derive from the global seed and the file's position in the
// sorted listing, so the same tree, P, and seed give bitwise-identical
// datasets on any platform.

namespace pcc {

inline constexpr char dataset_magic[4] = {'P', 'C', 'D', 'S'};

struct dataset {
    uint32_t points_per_cloud = 0;
    std::vector<std::string> class_names;
    std::vector<point_cloud> train;
    std::vector<point_cloud> test;
};

inline std::vector<uint8_t> save_dataset(const dataset& ds) {
    byte_writer w;
    w.raw(reinterpret_cast<const uint8_t*>(dataset_magic), 4);
    w.u8(format_version);
    w.u32(ds.points_per_cloud);
    w.u32(static_cast<uint32_t>(ds.train.size()));
    w.u32(static_cast<uint32_t>(ds.test.size()));
    w.u16(static_cast<uint16_t>(ds.class_names.size()));
    for (const auto& n : ds.class_names) w.str(n);
    auto write_records = [&](const std::vector<point_cloud>& records) {
        for (const auto& c : records) {
            check(c.pts.size() == ds.points_per_cloud,
                  "dataset: record size does not match header P");
            w.u8(c.label);
            for (const auto& p : c.pts)
                for (int k = 0; k < 3; ++k) w.f32(p[k]);
        }
    };
    write_records(ds.train);
    write_records(ds.test);
    return std::move(w.bytes);
}

inline dataset load_dataset(const std::vector<uint8_t>& bytes) {
    byte_reader r(bytes);
    uint8_t magic[4];
    r.raw(magic, 4);
    check(std::equal(magic, magic + 4, dataset_magic), "dataset: bad magic");
    const uint8_t version = r.u8();
    check(version == format_version,
          "dataset: unsupported format version " + std::to_string(version));
    dataset ds;
    ds.points_per_cloud = r.u32();
    const uint32_t n_train = r.u32();
    const uint32_t n_test = r.u32();
    const uint16_t n_classes = r.u16();
    ds.class_names.resize(n_classes);
    for (auto& n : ds.class_names) n = r.str();
    auto read_records = [&](uint32_t count) {
        std::vector<point_cloud> out(count);
        for (auto& c : out) {
            c.label = r.u8();
            check(c.label < n_classes, "dataset: label out of range");
            c.pts.resize(ds.points_per_cloud);
            for (auto& p : c.pts)
                for (int k = 0; k < 3; ++k) p[k] = r.f32();
        }
        return out;
    };
    ds.train = read_records(n_train);
    ds.test = read_records(n_test);
    check(r.remaining() == 0, "dataset: trailing bytes");
    return ds;
}

inline void save_dataset_file(const std::string& path, const dataset& ds) {
    write_file(path, save_dataset(ds));
}

inline dataset load_dataset_file(const std::string& path) {
    return load_dataset(read_file(path));
}

// ---------------------------------------------------------------------------
// ingestion

struct ingest_options {
    std::size_t points = 1024;
    uint64_t seed = 0;
    int grid_scale = 0;     // 0 disables grid quantization
    double jitter = 0;      // optional gaussian jitter after normalization
};

namespace detail {

inline std::vector<std::string> sorted_entries(const std::filesystem::path& dir,
                                               bool dirs) {
    std::vector<std::string> out;
    if (!std::filesystem::exists(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (dirs && e.is_directory())
            out.push_back(e.path().filename().string());
        else if (!dirs && e.is_regular_file() && e.path().extension() == ".off")
            out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

// One mesh file -> one normalized P-point cloud.
inline point_cloud ingest_mesh_file(const std::string& path, uint8_t label,
                                    const ingest_options& opt, uint64_t file_seed) {
    const mesh m = load_off_file(path);
    rng r(file_seed);
    point_cloud cloud;
    cloud.label = label;
    cloud.pts = sample_surface(m, opt.points, r);
    normalize_cloud(cloud.pts);
    if (opt.jitter > 0) jitter_cloud(cloud.pts, opt.jitter, r);
    if (opt.grid_scale >= 1) {
        std::vector<point3> q = grid_quantize(cloud.pts, opt.grid_scale);
        // pad back to P by cycling; duplicate points cannot change a
        // max-pooled feature vector
        cloud.pts.resize(opt.points);
        for (std::size_t i = 0; i < opt.points; ++i) cloud.pts[i] = q[i % q.size()];
    }
    return cloud;
}

inline dataset ingest_tree(const std::string& root, const ingest_options& opt) {
    namespace fs = std::filesystem;
    check_arg(fs::exists(root), "ingest: no such directory: " + root);
    dataset ds;
    ds.points_per_cloud = static_cast<uint32_t>(opt.points);
    ds.class_names = detail::sorted_entries(root, true);
    check(!ds.class_names.empty(), "ingest: no class directories under " + root);
    check(ds.class_names.size() <= 255, "ingest: too many classes");

    struct job {
        std::string path;
        uint8_t label;
        bool is_train;
        uint64_t seed;
    };
    std::vector<job> jobs;
    uint64_t ordinal = 0;
    for (std::size_t ci = 0; ci < ds.class_names.size(); ++ci) {
        for (int split = 0; split < 2; ++split) {
            const fs::path dir = fs::path(root) / ds.class_names[ci] /
                                 (split == 0 ? "train" : "test");
            for (const auto& f : detail::sorted_entries(dir, false))
                jobs.push_back({f, static_cast<uint8_t>(ci), split == 0,
                                mix_seed(opt.seed, ordinal++)});
        }
    }
    check(!jobs.empty(), "ingest: no .off files found under " + root);

    std::vector<point_cloud> clouds(jobs.size());
    std::vector<std::string> errors(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        try {
            clouds[i] = ingest_mesh_file(jobs[i].path, jobs[i].label, opt, jobs[i].seed);
        } catch (const std::exception& e) {
            errors[i] = jobs[i].path + ": " + e.what();
        }
    });
    for (const auto& e : errors)
        check(e.empty(), "ingest: " + e);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].is_train)
            ds.train.push_back(std::move(clouds[i]));
        else
            ds.test.push_back(std::move(clouds[i]));
    }
    return ds;
}

}  // namespace pcc
