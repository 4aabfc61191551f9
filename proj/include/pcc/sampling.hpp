#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "pcc/common.hpp"
#include "pcc/mesh_io.hpp"
#include "pcc/rng.hpp"
#include "pcc/tensor.hpp"

namespace pcc {

using point3 = std::array<float, 3>;

struct point_cloud {
    std::vector<point3> pts;
    uint8_t label = 0;
};

inline double triangle_area(const point3& a, const point3& b, const point3& c) {
    const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
    const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
    const double cx = uy * vz - uz * vy;
    const double cy = uz * vx - ux * vz;
    const double cz = ux * vy - uy * vx;
    return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

// Area-weighted surface sampling: triangles drawn proportionally to area,
// points placed uniformly inside via the reflected-barycentric trick.
inline std::vector<point3> sample_surface(const mesh& m, std::size_t count, rng& r) {
    check_arg(!m.faces.empty(), "sample_surface: mesh has no faces");
    std::vector<double> cum(m.faces.size());
    double total = 0;
    for (std::size_t i = 0; i < m.faces.size(); ++i) {
        const auto& f = m.faces[i];
        total += triangle_area(m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
        cum[i] = total;
    }
    check_arg(total > 0, "sample_surface: zero total surface area");
    std::vector<point3> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double target = r.uniform() * total;
        std::size_t lo = 0, hi = cum.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cum[mid] < target)
                lo = mid + 1;
            else
                hi = mid;
        }
        const auto& f = m.faces[lo];
        const point3& a = m.vertices[f[0]];
        const point3& b = m.vertices[f[1]];
        const point3& c = m.vertices[f[2]];
        double u = r.uniform(), v = r.uniform();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        for (int k = 0; k < 3; ++k)
            out[i][k] = static_cast<float>(a[k] + u * (b[k] - a[k]) + v * (c[k] - a[k]));
    }
    return out;
}

// centroid to the origin, then scale so the farthest point sits on the unit
// sphere
inline void normalize_cloud(std::vector<point3>& pts) {
    check_arg(!pts.empty(), "normalize: empty cloud");
    double cx = 0, cy = 0, cz = 0;
    for (const auto& p : pts) {
        cx += p[0];
        cy += p[1];
        cz += p[2];
    }
    const double n = static_cast<double>(pts.size());
    cx /= n;
    cy /= n;
    cz /= n;
    double max_norm = 0;
    for (const auto& p : pts) {
        const double dx = p[0] - cx, dy = p[1] - cy, dz = p[2] - cz;
        max_norm = std::max(max_norm, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    const double s = max_norm > 0 ? 1.0 / max_norm : 1.0;
    for (auto& p : pts) {
        p[0] = static_cast<float>((p[0] - cx) * s);
        p[1] = static_cast<float>((p[1] - cy) * s);
        p[2] = static_cast<float>((p[2] - cz) * s);
    }
}

// P points drawn uniformly without replacement (partial Fisher-Yates)
inline std::vector<point3> subsample(const std::vector<point3>& pts, std::size_t count,
                                     rng& r) {
    check_arg(count <= pts.size(), "subsample: requested " + std::to_string(count) +
                                       " points from a cloud of " +
                                       std::to_string(pts.size()));
    std::vector<std::size_t> idx(pts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<point3> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(r.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
        out[i] = pts[idx[i]];
    }
    return out;
}

// snap coordinates to a grid with S bins per unit and drop duplicate points
// (first occurrence wins)
inline std::vector<point3> grid_quantize(const std::vector<point3>& pts, int scale) {
    check_arg(scale >= 1, "grid_quantize: scale must be >= 1");
    struct key_hash {
        std::size_t operator()(const std::array<int64_t, 3>& k) const {
            uint64_t h = 1469598103934665603ULL;
            for (int64_t v : k) {
                h ^= static_cast<uint64_t>(v);
                h *= 1099511628211ULL;
            }
            return static_cast<std::size_t>(h);
        }
    };
    std::unordered_set<std::array<int64_t, 3>, key_hash> seen;
    std::vector<point3> out;
    out.reserve(pts.size());
    const double s = static_cast<double>(scale);
    for (const auto& p : pts) {
        std::array<int64_t, 3> cell{};
        point3 q{};
        for (int k = 0; k < 3; ++k) {
            cell[k] = static_cast<int64_t>(std::llround(p[k] * s));
            q[k] = static_cast<float>(static_cast<double>(cell[k]) / s);
        }
        if (seen.insert(cell).second) out.push_back(q);
    }
    return out;
}

inline void jitter_cloud(std::vector<point3>& pts, double sigma, rng& r) {
    for (auto& p : pts)
        for (int k = 0; k < 3; ++k)
            p[k] = static_cast<float>(p[k] + sigma * r.normal());
}

// [3 x P] tensor view of a cloud, rows x/y/z
template <typename T>
tensor<T> cloud_tensor(const std::vector<point3>& pts) {
    check_arg(!pts.empty(), "cloud_tensor: empty cloud");
    tensor<T> t({3, pts.size()});
    for (std::size_t p = 0; p < pts.size(); ++p)
        for (std::size_t k = 0; k < 3; ++k)
            t.at(k, p) = static_cast<T>(pts[p][k]);
    return t;
}

template <typename T>
std::vector<point3> tensor_cloud(const tensor<T>& t) {
    check_arg(t.shape.size() == 2 && t.rows() == 3, "tensor_cloud: expected [3 x P]");
    std::vector<point3> pts(t.cols());
    for (std::size_t p = 0; p < t.cols(); ++p)
        for (std::size_t k = 0; k < 3; ++k)
            pts[p][k] = static_cast<float>(t.at(k, p));
    return pts;
}

}  // namespace pcc
