#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "pcc/common.hpp"
#include "pcc/mesh_io.hpp"
#include "pcc/rng.hpp"

// Procedural 40-class mesh corpus in the ModelNet40 directory layout
// (<class>/<train|test>/<class>_NNNN.off). Shapes are triangle soups built
// from a few primitives with per-model parameter jitter, so every class is
// geometrically distinct while no two models are identical. Useful as a
// self-contained stand-in corpus when the real dataset is not on disk.

namespace pcc {

namespace synth {

inline constexpr double pi = 3.14159265358979323846;

inline void merge(mesh& dst, const mesh& src) {
    const uint32_t base = static_cast<uint32_t>(dst.vertices.size());
    dst.vertices.insert(dst.vertices.end(), src.vertices.begin(), src.vertices.end());
    for (const auto& f : src.faces)
        dst.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

inline void translate(mesh& m, double dx, double dy, double dz) {
    for (auto& v : m.vertices) {
        v[0] = static_cast<float>(v[0] + dx);
        v[1] = static_cast<float>(v[1] + dy);
        v[2] = static_cast<float>(v[2] + dz);
    }
}

inline void scale(mesh& m, double sx, double sy, double sz) {
    for (auto& v : m.vertices) {
        v[0] = static_cast<float>(v[0] * sx);
        v[1] = static_cast<float>(v[1] * sy);
        v[2] = static_cast<float>(v[2] * sz);
    }
}

inline void rotate_z90(mesh& m) {
    for (auto& v : m.vertices) {
        const float x = v[0], y = v[1];
        v[0] = y;
        v[1] = -x;
    }
}

inline void rotate_x90(mesh& m) {
    for (auto& v : m.vertices) {
        const float y = v[1], z = v[2];
        v[1] = -z;
        v[2] = y;
    }
}

// axis-aligned box centered at the origin, full extents (sx, sy, sz)
inline mesh box(double sx, double sy, double sz) {
    mesh m;
    const double x = sx / 2, y = sy / 2, z = sz / 2;
    m.vertices = {{float(-x), float(-y), float(-z)}, {float(x), float(-y), float(-z)},
                  {float(x), float(y), float(-z)},   {float(-x), float(y), float(-z)},
                  {float(-x), float(-y), float(z)},  {float(x), float(-y), float(z)},
                  {float(x), float(y), float(z)},    {float(-x), float(y), float(z)}};
    const uint32_t quads[6][4] = {{0, 1, 2, 3}, {4, 7, 6, 5}, {0, 4, 5, 1},
                                  {3, 2, 6, 7}, {0, 3, 7, 4}, {1, 5, 6, 2}};
    for (const auto& q : quads) {
        m.faces.push_back({q[0], q[1], q[2]});
        m.faces.push_back({q[0], q[2], q[3]});
    }
    return m;
}

// UV sphere (ellipsoid via radii), poles on the y axis
inline mesh ellipsoid(double rx, double ry, double rz, int stacks = 10,
                      int slices = 16) {
    mesh m;
    for (int i = 0; i <= stacks; ++i) {
        const double phi = pi * i / stacks;  // 0 at top pole
        for (int j = 0; j < slices; ++j) {
            const double th = 2 * pi * j / slices;
            m.vertices.push_back({static_cast<float>(rx * std::sin(phi) * std::cos(th)),
                                  static_cast<float>(ry * std::cos(phi)),
                                  static_cast<float>(rz * std::sin(phi) * std::sin(th))});
        }
    }
    auto at = [&](int i, int j) {
        return static_cast<uint32_t>(i * slices + (j % slices));
    };
    for (int i = 0; i < stacks; ++i)
        for (int j = 0; j < slices; ++j) {
            m.faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            m.faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    return m;
}

// cylinder / cone / frustum / k-gon prism along the y axis, optionally capped
inline mesh cylinder(double r_bottom, double r_top, double h, int sides = 24,
                     bool caps = true) {
    mesh m;
    const double y0 = -h / 2, y1 = h / 2;
    for (int j = 0; j < sides; ++j) {
        const double th = 2 * pi * j / sides;
        m.vertices.push_back({static_cast<float>(r_bottom * std::cos(th)),
                              static_cast<float>(y0),
                              static_cast<float>(r_bottom * std::sin(th))});
    }
    for (int j = 0; j < sides; ++j) {
        const double th = 2 * pi * j / sides;
        m.vertices.push_back({static_cast<float>(r_top * std::cos(th)),
                              static_cast<float>(y1),
                              static_cast<float>(r_top * std::sin(th))});
    }
    auto bot = [&](int j) { return static_cast<uint32_t>(j % sides); };
    auto top = [&](int j) { return static_cast<uint32_t>(sides + j % sides); };
    for (int j = 0; j < sides; ++j) {
        m.faces.push_back({bot(j), top(j), top(j + 1)});
        m.faces.push_back({bot(j), top(j + 1), bot(j + 1)});
    }
    if (caps) {
        const uint32_t cb = static_cast<uint32_t>(m.vertices.size());
        m.vertices.push_back({0, static_cast<float>(y0), 0});
        const uint32_t ct = static_cast<uint32_t>(m.vertices.size());
        m.vertices.push_back({0, static_cast<float>(y1), 0});
        for (int j = 0; j < sides; ++j) {
            if (r_bottom > 0) m.faces.push_back({cb, bot(j + 1), bot(j)});
            if (r_top > 0) m.faces.push_back({ct, top(j), top(j + 1)});
        }
    }
    return m;
}

inline mesh torus(double R, double r, int seg_major = 24, int seg_minor = 12) {
    mesh m;
    for (int i = 0; i < seg_major; ++i) {
        const double a = 2 * pi * i / seg_major;
        for (int j = 0; j < seg_minor; ++j) {
            const double b = 2 * pi * j / seg_minor;
            const double rad = R + r * std::cos(b);
            m.vertices.push_back({static_cast<float>(rad * std::cos(a)),
                                  static_cast<float>(r * std::sin(b)),
                                  static_cast<float>(rad * std::sin(a))});
        }
    }
    auto at = [&](int i, int j) {
        return static_cast<uint32_t>((i % seg_major) * seg_minor + (j % seg_minor));
    };
    for (int i = 0; i < seg_major; ++i)
        for (int j = 0; j < seg_minor; ++j) {
            m.faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            m.faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    return m;
}

// star polygon extruded along y
inline mesh star_prism(double r_outer, double r_inner, int points, double h) {
    mesh m;
    const int n = 2 * points;
    const double y0 = -h / 2, y1 = h / 2;
    for (int layer = 0; layer < 2; ++layer) {
        const double y = layer == 0 ? y0 : y1;
        for (int j = 0; j < n; ++j) {
            const double r = (j % 2 == 0) ? r_outer : r_inner;
            const double th = pi * j / points;
            m.vertices.push_back({static_cast<float>(r * std::cos(th)),
                                  static_cast<float>(y),
                                  static_cast<float>(r * std::sin(th))});
        }
    }
    auto bot = [&](int j) { return static_cast<uint32_t>(j % n); };
    auto top = [&](int j) { return static_cast<uint32_t>(n + j % n); };
    for (int j = 0; j < n; ++j) {
        m.faces.push_back({bot(j), top(j), top(j + 1)});
        m.faces.push_back({bot(j), top(j + 1), bot(j + 1)});
    }
    const uint32_t cb = static_cast<uint32_t>(m.vertices.size());
    m.vertices.push_back({0, static_cast<float>(y0), 0});
    const uint32_t ct = static_cast<uint32_t>(m.vertices.size());
    m.vertices.push_back({0, static_cast<float>(y1), 0});
    for (int j = 0; j < n; ++j) {
        m.faces.push_back({cb, bot(j + 1), bot(j)});
        m.faces.push_back({ct, top(j), top(j + 1)});
    }
    return m;
}

}  // namespace synth

inline const std::vector<std::string>& synthetic_class_names() {
    static const std::vector<std::string> names = {
        "cube",      "slab",      "pillar",   "sphere",   "spheroid_tall",
        "spheroid_flat", "cylinder", "disc",   "cone",     "frustum",
        "torus",     "ring",      "capsule",  "pyramid",  "wedge",
        "prism3",    "prism6",    "prism8",   "pipe",     "cross",
        "lbeam",     "tbeam",     "hbeam",    "uchannel", "stairs3",
        "stairs5",   "table",     "chair",    "stool",    "arch",
        "bottle",    "hourglass", "dumbbell", "mushroom", "star",
        "gear",      "ladder",    "fence",    "plates",   "lamp"};
    return names;
}

// One randomized model of the given class. `r` drives the per-model
// parameter jitter.
inline mesh synthetic_mesh(std::size_t class_id, rng& r) {
    using namespace synth;
    auto j = [&](double v) { return v * r.uniform(0.9, 1.1); };
    mesh m;
    switch (class_id) {
        case 0: m = box(j(1.0), j(1.0), j(1.0)); break;
        case 1: m = box(j(1.4), j(0.25), j(1.0)); break;
        case 2: m = box(j(0.4), j(1.8), j(0.4)); break;
        case 3: m = ellipsoid(j(0.8), j(0.8), j(0.8)); break;
        case 4: m = ellipsoid(j(0.45), j(1.0), j(0.45)); break;
        case 5: m = ellipsoid(j(0.95), j(0.35), j(0.95)); break;
        case 6: m = cylinder(j(0.45), j(0.45), j(1.5)); break;
        case 7: m = cylinder(j(0.9), j(0.9), j(0.14)); break;
        case 8: m = cylinder(j(0.7), 0.0, j(1.3)); break;
        case 9: m = cylinder(j(0.75), j(0.33), j(1.1)); break;
        case 10: m = torus(j(0.65), j(0.26)); break;
        case 11: m = torus(j(0.8), j(0.07)); break;
        case 12: {
            const double rr = j(0.35), hh = j(1.0);
            m = cylinder(rr, rr, hh, 24, false);
            mesh cap = ellipsoid(rr, rr, rr);
            translate(cap, 0, hh / 2, 0);
            merge(m, cap);
            mesh cap2 = ellipsoid(rr, rr, rr);
            translate(cap2, 0, -hh / 2, 0);
            merge(m, cap2);
            break;
        }
        case 13: m = cylinder(j(0.8), 0.0, j(1.2), 4); break;
        case 14: {
            m = cylinder(j(0.7), j(0.7), j(1.2), 3);
            rotate_x90(m);
            break;
        }
        case 15: m = cylinder(j(0.6), j(0.6), j(1.3), 3); break;
        case 16: m = cylinder(j(0.6), j(0.6), j(1.3), 6); break;
        case 17: m = cylinder(j(0.6), j(0.6), j(1.3), 8); break;
        case 18: {
            m = cylinder(j(0.4), j(0.4), j(1.4), 24, false);
            merge(m, cylinder(j(0.26), j(0.26), j(1.4), 24, false));
            break;
        }
        case 19: {
            m = box(j(1.5), j(0.3), j(0.3));
            merge(m, box(j(0.3), j(1.5), j(0.3)));
            break;
        }
        case 20: {
            m = box(j(1.2), j(0.3), j(0.3));
            mesh up = box(j(0.3), j(1.2), j(0.3));
            translate(up, -0.45, 0.7, 0);
            merge(m, up);
            break;
        }
        case 21: {
            m = box(j(1.4), j(0.3), j(0.3));
            mesh up = box(j(0.3), j(1.2), j(0.3));
            translate(up, 0, -0.7, 0);
            merge(m, up);
            break;
        }
        case 22: {
            m = box(j(0.3), j(1.4), j(0.3));
            mesh right = box(j(0.3), j(1.4), j(0.3));
            translate(right, 1.0, 0, 0);
            merge(m, right);
            mesh bar = box(j(1.0), j(0.3), j(0.3));
            translate(bar, 0.5, 0, 0);
            merge(m, bar);
            break;
        }
        case 23: {
            m = box(j(0.3), j(1.2), j(0.3));
            mesh right = box(j(0.3), j(1.2), j(0.3));
            translate(right, 1.1, 0, 0);
            merge(m, right);
            mesh bottom = box(j(1.4), j(0.3), j(0.3));
            translate(bottom, 0.55, -0.55, 0);
            merge(m, bottom);
            break;
        }
        case 24:
        case 25: {
            const int steps = class_id == 24 ? 3 : 5;
            const double w = j(1.2), d = j(0.4), hstep = j(0.3);
            for (int s = 0; s < steps; ++s) {
                mesh step = box(w, hstep, d);
                translate(step, 0, (s + 0.5) * hstep, (s + 0.5) * d);
                merge(m, step);
            }
            break;
        }
        case 26: {
            m = box(j(1.4), j(0.12), j(0.9));
            translate(m, 0, 0.7, 0);
            for (int sx = -1; sx <= 1; sx += 2)
                for (int sz = -1; sz <= 1; sz += 2) {
                    mesh leg = box(0.1, 0.7, 0.1);
                    translate(leg, sx * 0.6, 0.35, sz * 0.36);
                    merge(m, leg);
                }
            break;
        }
        case 27: {
            m = box(j(0.8), j(0.1), j(0.8));
            translate(m, 0, 0.45, 0);
            mesh back = box(j(0.8), j(0.9), j(0.1));
            translate(back, 0, 0.9, -0.36);
            merge(m, back);
            for (int sx = -1; sx <= 1; sx += 2)
                for (int sz = -1; sz <= 1; sz += 2) {
                    mesh leg = box(0.08, 0.45, 0.08);
                    translate(leg, sx * 0.34, 0.22, sz * 0.34);
                    merge(m, leg);
                }
            break;
        }
        case 28: {
            m = cylinder(j(0.45), j(0.45), j(0.08));
            translate(m, 0, 0.5, 0);
            for (int k = 0; k < 3; ++k) {
                const double th = 2 * synth::pi * k / 3;
                mesh leg = cylinder(0.05, 0.05, 0.5, 10);
                translate(leg, 0.3 * std::cos(th), 0.25, 0.3 * std::sin(th));
                merge(m, leg);
            }
            break;
        }
        case 29: {
            for (int sx = -1; sx <= 1; sx += 2) {
                mesh pillar = box(j(0.3), j(1.2), j(0.3));
                translate(pillar, sx * 0.6, 0, 0);
                merge(m, pillar);
            }
            mesh top = box(j(1.6), j(0.3), j(0.3));
            translate(top, 0, 0.75, 0);
            merge(m, top);
            break;
        }
        case 30: {
            m = cylinder(j(0.4), j(0.4), j(1.0));
            mesh neck = cylinder(j(0.15), j(0.15), j(0.5));
            translate(neck, 0, 0.75, 0);
            merge(m, neck);
            break;
        }
        case 31: {
            m = cylinder(j(0.6), 0.03, j(0.7));
            translate(m, 0, 0.35, 0);
            mesh lower = cylinder(0.03, j(0.6), j(0.7));
            translate(lower, 0, -0.35, 0);
            merge(m, lower);
            break;
        }
        case 32: {
            const double rr = j(0.4);
            m = ellipsoid(rr, rr, rr);
            translate(m, 0.7, 0, 0);
            mesh other = ellipsoid(rr, rr, rr);
            translate(other, -0.7, 0, 0);
            merge(m, other);
            mesh bar = cylinder(j(0.12), j(0.12), 1.4, 12);
            rotate_z90(bar);
            merge(m, bar);
            break;
        }
        case 33: {
            m = ellipsoid(j(0.7), j(0.35), j(0.7));
            translate(m, 0, 0.5, 0);
            mesh stem = cylinder(j(0.18), j(0.18), j(0.8), 12);
            merge(m, stem);
            break;
        }
        case 34: m = star_prism(j(0.9), j(0.4), 5, j(0.3)); break;
        case 35: {
            m = cylinder(j(0.6), j(0.6), j(0.25));
            for (int k = 0; k < 8; ++k) {
                const double th = 2 * synth::pi * k / 8;
                mesh tooth = box(0.25, 0.22, 0.18);
                translate(tooth, 0.7 * std::cos(th), 0, 0.7 * std::sin(th));
                merge(m, tooth);
            }
            break;
        }
        case 36: {
            for (int sx = -1; sx <= 1; sx += 2) {
                mesh rail = box(0.08, j(1.8), 0.08);
                translate(rail, sx * 0.35, 0, 0);
                merge(m, rail);
            }
            for (int k = 0; k < 4; ++k) {
                mesh rung = box(0.7, 0.08, 0.08);
                translate(rung, 0, -0.6 + 0.4 * k, 0);
                merge(m, rung);
            }
            break;
        }
        case 37: {
            for (int k = 0; k < 5; ++k) {
                mesh picket = box(0.1, j(1.0), 0.08);
                translate(picket, -0.8 + 0.4 * k, 0, 0);
                merge(m, picket);
            }
            for (int s = -1; s <= 1; s += 2) {
                mesh rail = box(1.8, 0.1, 0.06);
                translate(rail, 0, s * 0.3, 0);
                merge(m, rail);
            }
            break;
        }
        case 38: {
            for (int k = -1; k <= 1; ++k) {
                mesh plate = cylinder(j(0.8), j(0.8), 0.1);
                translate(plate, 0, 0.4 * k, 0);
                merge(m, plate);
            }
            break;
        }
        case 39: {
            m = cylinder(j(0.5), j(0.5), 0.1);
            translate(m, 0, -0.8, 0);
            mesh pole = cylinder(0.07, 0.07, j(1.4), 10);
            merge(m, pole);
            mesh shade = cylinder(j(0.55), j(0.25), j(0.45));
            translate(shade, 0, 0.75, 0);
            merge(m, shade);
            break;
        }
        default:
            throw std::invalid_argument("synthetic_mesh: class id out of range");
    }
    synth::scale(m, r.uniform(0.85, 1.15), r.uniform(0.85, 1.15),
                 r.uniform(0.85, 1.15));
    return m;
}

// Writes the corpus as OFF files in the ModelNet40 tree layout.
inline void write_synthetic_tree(const std::string& root, std::size_t train_per_class,
                                 std::size_t test_per_class, uint64_t seed) {
    namespace fs = std::filesystem;
    const auto& names = synthetic_class_names();
    for (std::size_t ci = 0; ci < names.size(); ++ci) {
        for (int split = 0; split < 2; ++split) {
            const fs::path dir =
                fs::path(root) / names[ci] / (split == 0 ? "train" : "test");
            fs::create_directories(dir);
            const std::size_t count = split == 0 ? train_per_class : test_per_class;
            for (std::size_t k = 0; k < count; ++k) {
                rng r(mix_seed(seed, (ci * 2 + split) * 100000ULL + k));
                const mesh m = synthetic_mesh(ci, r);
                char fname[64];
                std::snprintf(fname, sizeof(fname), "%s_%04zu.off", names[ci].c_str(),
                              k + 1);
                write_off_file((dir / fname).string(), m);
            }
        }
    }
}

}  // namespace pcc
