#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pcc/codec.hpp"
#include "pcc/entropy.hpp"
#include "pcc/serialize.hpp"

// Model checkpoint. Layout (little-endian):
//
//   magic "PCCK", u8 version, u8 config id, u32 P, f64 lambda
//   u32 tensor count, then per tensor:
//     u16 name length + name bytes, u8 ndim, u32 dims..., f32 values
//   u16 channel count, then per entropy-coding channel:
//     i32 min value, u32 cdf length, u32 cdf entries
//
// Tensors cover trainable parameters, batch-norm running statistics, and the
// entropy model; the quantized coding tables ride along so encoder and
// decoder share bit-identical integer tables. Values are 32-bit floats and
// round-trip bit-exactly.

namespace pcc {

inline constexpr char checkpoint_magic[4] = {'P', 'C', 'C', 'K'};

template <typename T>
struct checkpoint {
    pointnet_codec<T> model;
    coding_table tables;
    double lambda = 0;
};

template <typename T>
std::vector<uint8_t> save_checkpoint(pointnet_codec<T>& model,
                                     const coding_table& tables, double lambda) {
    byte_writer w;
    w.raw(reinterpret_cast<const uint8_t*>(checkpoint_magic), 4);
    w.u8(format_version);
    w.u8(model.cfg.id);
    w.u32(static_cast<uint32_t>(model.cfg.points));
    w.f64(lambda);
    auto named = model.named_state();
    w.u32(static_cast<uint32_t>(named.size()));
    for (auto& [name, t] : named) {
        w.str(name);
        w.u8(static_cast<uint8_t>(t->shape.size()));
        for (std::size_t d : t->shape) w.u32(static_cast<uint32_t>(d));
        for (const T& v : t->data) w.f32(static_cast<float>(v));
    }
    w.u16(static_cast<uint16_t>(tables.channels.size()));
    for (const auto& ch : tables.channels) {
        w.i32(ch.min_v);
        w.u32(static_cast<uint32_t>(ch.cdf.size()));
        for (uint32_t v : ch.cdf) w.u32(v);
    }
    return std::move(w.bytes);
}

template <typename T>
checkpoint<T> load_checkpoint(const std::vector<uint8_t>& bytes) {
    byte_reader r(bytes);
    uint8_t magic[4];
    r.raw(magic, 4);
    check(std::equal(magic, magic + 4, checkpoint_magic), "checkpoint: bad magic");
    const uint8_t version = r.u8();
    check(version == format_version,
          "checkpoint: unsupported format version " + std::to_string(version));
    const uint8_t config_id = r.u8();
    const uint32_t points = r.u32();
    const double lambda = r.f64();

    checkpoint<T> ck;
    ck.lambda = lambda;
    ck.model = pointnet_codec<T>::create(config_from_id(config_id, points), 0);

    const uint32_t count = r.u32();
    std::map<std::string, tensor<T>*> slots;
    for (auto& [name, t] : ck.model.named_state()) slots[name] = t;
    check(count == slots.size(),
          "checkpoint: tensor count mismatch (" + std::to_string(count) + " vs " +
              std::to_string(slots.size()) + " expected)");
    for (uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str();
        auto it = slots.find(name);
        check(it != slots.end(), "checkpoint: unexpected tensor '" + name + "'");
        tensor<T>* t = it->second;
        const uint8_t ndim = r.u8();
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = r.u32();
        check(shape == t->shape, "checkpoint: shape mismatch for '" + name + "'");
        for (auto& v : t->data) v = static_cast<T>(r.f32());
    }

    const uint16_t channels = r.u16();
    check(channels == ck.model.cfg.latent, "checkpoint: coding table channel count");
    ck.tables.channels.resize(channels);
    for (auto& ch : ck.tables.channels) {
        ch.min_v = r.i32();
        const uint32_t n = r.u32();
        check(n >= 2, "checkpoint: empty coding table");
        ch.cdf.resize(n);
        for (auto& v : ch.cdf) v = r.u32();
        ch.max_v = ch.min_v + static_cast<int32_t>(n) - 3;  // cdf has symbols+1
        ch.validate();
    }
    check(r.remaining() == 0, "checkpoint: trailing bytes");
    return ck;
}

template <typename T>
void save_checkpoint_file(const std::string& path, pointnet_codec<T>& model,
                          const coding_table& tables, double lambda) {
    write_file(path, save_checkpoint(model, tables, lambda));
}

template <typename T>
checkpoint<T> load_checkpoint_file(const std::string& path) {
    return load_checkpoint<T>(read_file(path));
}

}  // namespace pcc
