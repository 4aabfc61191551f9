#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcc/codec.hpp"
#include "pcc/entropy.hpp"
#include "pcc/range_coder.hpp"
#include "pcc/serialize.hpp"

// Compressed-cloud container. Layout (little-endian):
//
//   offset  size  field
//   0       4     magic "PCCC"
//   4       1     format version
//   5       1     config id (0 full, 1 lite, 2 micro)
//   6       2     latent size N
//   8       4     point count P the model was trained for
//   12      4     payload byte length
//   16      ...   range-coded payload
//
// Coding tables live in the model checkpoint, not in the stream: a stream is
// only meaningful next to the model that produced it. A table mismatch is
// detected only probabilistically (the decode will usually produce garbage
// symbols or run past the payload, but it cannot be guaranteed to fail).

namespace pcc {

inline constexpr char stream_magic[4] = {'P', 'C', 'C', 'C'};
inline constexpr std::size_t stream_header_bytes = 16;

struct stream_header {
    uint8_t version = format_version;
    uint8_t config_id = 0;
    uint16_t latent = 0;
    uint32_t points = 0;
    uint32_t payload_bytes = 0;
};

inline void write_stream_header(byte_writer& w, const stream_header& h) {
    w.raw(reinterpret_cast<const uint8_t*>(stream_magic), 4);
    w.u8(h.version);
    w.u8(h.config_id);
    w.u16(h.latent);
    w.u32(h.points);
    w.u32(h.payload_bytes);
}

inline stream_header read_stream_header(byte_reader& r) {
    uint8_t magic[4];
    r.raw(magic, 4);
    check(std::equal(magic, magic + 4, stream_magic), "bitstream: bad magic");
    stream_header h;
    h.version = r.u8();
    check(h.version == format_version,
          "bitstream: unsupported format version " + std::to_string(h.version));
    h.config_id = r.u8();
    h.latent = r.u16();
    h.points = r.u32();
    h.payload_bytes = r.u32();
    return h;
}

template <typename T>
std::vector<uint8_t> compress_cloud(const pointnet_codec<T>& model,
                                    const coding_table& tables,
                                    const tensor<T>& cloud) {
    const tensor<T> y = model.analyze_one(cloud);
    const std::vector<int32_t> q = quantize_latent(y);
    const std::vector<uint8_t> payload = range_encode(q, tables);
    stream_header h;
    h.config_id = model.cfg.id;
    h.latent = static_cast<uint16_t>(model.cfg.latent);
    h.points = static_cast<uint32_t>(model.cfg.points);
    h.payload_bytes = static_cast<uint32_t>(payload.size());
    byte_writer w;
    write_stream_header(w, h);
    w.raw(payload.data(), payload.size());
    return std::move(w.bytes);
}

template <typename T>
struct decompress_result {
    std::vector<int32_t> latent;
    tensor<T> logits;
};

template <typename T>
decompress_result<T> decompress_cloud(const pointnet_codec<T>& model,
                                      const coding_table& tables,
                                      const std::vector<uint8_t>& bytes) {
    byte_reader r(bytes);
    const stream_header h = read_stream_header(r);
    check(h.config_id == model.cfg.id,
          "bitstream: config mismatch (stream id " + std::to_string(h.config_id) +
              ", checkpoint id " + std::to_string(model.cfg.id) + ")");
    check(h.latent == model.cfg.latent, "bitstream: latent size mismatch");
    check(h.points == model.cfg.points,
          "bitstream: stream was produced by a model trained for P = " +
              std::to_string(h.points) + ", checkpoint has P = " +
              std::to_string(model.cfg.points));
    check(r.remaining() == h.payload_bytes,
          "bitstream: payload length mismatch (header says " +
              std::to_string(h.payload_bytes) + ", have " +
              std::to_string(r.remaining()) + ")");
    decompress_result<T> out;
    out.latent = range_decode(r.p, h.payload_bytes, tables);
    tensor<T> yhat({model.cfg.latent, 1});
    for (std::size_t i = 0; i < out.latent.size(); ++i)
        yhat[i] = static_cast<T>(out.latent[i]);
    out.logits = model.synthesize_one(yhat);
    return out;
}

inline std::size_t payload_bits(const std::vector<uint8_t>& stream_bytes) {
    check_arg(stream_bytes.size() >= stream_header_bytes, "bitstream: too short");
    return 8 * (stream_bytes.size() - stream_header_bytes);
}

}  // namespace pcc
