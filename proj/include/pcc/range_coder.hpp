#pragma once

#include <cstdint>
#include <vector>

#include "pcc/common.hpp"
#include "pcc/entropy.hpp"

// Byte-oriented range coder with 16-bit probability precision. The encoder
// keeps a 32-bit low/range pair; carries out of `low` walk back through the
// already-emitted buffer (the stream starts with one spare zero byte so the
// walk always terminates). Renormalization happens before each symbol, so
// encoder and decoder consume bytes in lockstep: the decoder primes five
// bytes (the spare byte falls off its 32-bit window) and the encoder ends by
// flushing the four bytes of `low`, which lands the final code point exactly
// on the bottom of the last interval.
//
// The coding path is integer-only: identical symbols and tables produce
// byte-identical streams on every platform.

namespace pcc {

class range_encoder {
public:
    range_encoder() { out_.push_back(0); }  // carry landing pad

    void encode(uint32_t cum, uint32_t freq) {
        // total is fixed at 2^16; requires cum + freq <= 65536, freq >= 1
        while (range_ < (1u << 24)) {
            out_.push_back(static_cast<uint8_t>(low_ >> 24));
            low_ <<= 8;
            range_ <<= 8;
        }
        const uint32_t r = range_ >> 16;
        const uint32_t prev = low_;
        low_ += cum * r;
        if (low_ < prev) propagate_carry();
        range_ = freq * r;
    }

    std::vector<uint8_t> finish() {
        for (int i = 0; i < 4; ++i) {
            out_.push_back(static_cast<uint8_t>(low_ >> 24));
            low_ <<= 8;
        }
        return std::move(out_);
    }

private:
    void propagate_carry() {
        for (auto it = out_.rbegin(); it != out_.rend(); ++it) {
            *it += 1;
            if (*it != 0) break;
        }
    }

    uint32_t low_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    std::vector<uint8_t> out_;
};

class range_decoder {
public:
    range_decoder(const uint8_t* data, std::size_t size)
        : p_(data), end_(data + size) {
        for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
    }
    explicit range_decoder(const std::vector<uint8_t>& bytes)
        : range_decoder(bytes.data(), bytes.size()) {}

    // scaled position of the code point inside the current range, in
    // [0, 65535]; renormalizes, so call exactly once per symbol
    uint32_t decode_target() {
        while (range_ < (1u << 24)) {
            code_ = (code_ << 8) | next_byte();
            range_ <<= 8;
        }
        const uint32_t t = code_ / (range_ >> 16);
        return t > 0xFFFFu ? 0xFFFFu : t;
    }

    void advance(uint32_t cum, uint32_t freq) {
        const uint32_t r = range_ >> 16;
        code_ -= cum * r;  // wraparound mirrors encoder-side carries
        range_ = freq * r;
    }

private:
    uint8_t next_byte() {
        check(p_ < end_, "range decoder: truncated payload");
        return *p_++;
    }

    const uint8_t* p_;
    const uint8_t* end_;
    uint32_t code_ = 0;  // code minus low
    uint32_t range_ = 0xFFFFFFFFu;
};

// ---------------------------------------------------------------------------
// symbol layer: integer latents against per-channel tables
//
// Values inside a channel's support map to a table symbol directly. Values
// outside are sent as the escape symbol followed by the zigzagged value in
// LEB128 bytes, each byte coded with a flat 1/256 probability (exactly 8 bits).

inline uint32_t zigzag32(int32_t v) {
    return (static_cast<uint32_t>(v) << 1) ^ static_cast<uint32_t>(v >> 31);
}

inline int32_t unzigzag32(uint32_t u) {
    return static_cast<int32_t>(u >> 1) ^ -static_cast<int32_t>(u & 1);
}

inline void encode_raw_byte(range_encoder& enc, uint8_t byte) {
    enc.encode(static_cast<uint32_t>(byte) << 8, 1u << 8);
}

inline uint8_t decode_raw_byte(range_decoder& dec) {
    const uint8_t byte = static_cast<uint8_t>(dec.decode_target() >> 8);
    dec.advance(static_cast<uint32_t>(byte) << 8, 1u << 8);
    return byte;
}

inline std::size_t leb128_size(uint32_t u) {
    std::size_t n = 1;
    while (u >= 0x80) {
        u >>= 7;
        ++n;
    }
    return n;
}

inline std::vector<uint8_t> range_encode(const std::vector<int32_t>& values,
                                         const coding_table& tables) {
    check_arg(values.size() == tables.channels.size(),
              "range_encode: value count != channel count");
    range_encoder enc;
    for (std::size_t c = 0; c < values.size(); ++c) {
        const channel_table& t = tables.channels[c];
        const std::size_t s = t.symbol_of(values[c]);
        enc.encode(t.cdf[s], t.freq(s));
        if (s == t.escape_symbol()) {
            uint32_t u = zigzag32(values[c]);
            while (u >= 0x80) {
                encode_raw_byte(enc, static_cast<uint8_t>(u) | 0x80);
                u >>= 7;
            }
            encode_raw_byte(enc, static_cast<uint8_t>(u));
        }
    }
    return enc.finish();
}

inline std::vector<int32_t> range_decode(const uint8_t* bytes, std::size_t size,
                                         const coding_table& tables) {
    range_decoder dec(bytes, size);
    std::vector<int32_t> values(tables.channels.size());
    for (std::size_t c = 0; c < values.size(); ++c) {
        const channel_table& t = tables.channels[c];
        const uint32_t target = dec.decode_target();
        // find symbol with cdf[s] <= target < cdf[s+1]
        std::size_t lo = 0, hi = t.symbol_count();
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (t.cdf[mid] <= target)
                lo = mid;
            else
                hi = mid;
        }
        dec.advance(t.cdf[lo], t.freq(lo));
        if (lo == t.escape_symbol()) {
            uint32_t u = 0;
            int shift = 0;
            for (;;) {
                check(shift < 35, "range decoder: malformed escape value");
                const uint8_t byte = decode_raw_byte(dec);
                u |= static_cast<uint32_t>(byte & 0x7F) << shift;
                if (!(byte & 0x80)) break;
                shift += 7;
            }
            values[c] = unzigzag32(u);
        } else {
            values[c] = t.min_v + static_cast<int32_t>(lo);
        }
    }
    return values;
}

inline std::vector<int32_t> range_decode(const std::vector<uint8_t>& bytes,
                                         const coding_table& tables) {
    return range_decode(bytes.data(), bytes.size(), tables);
}

// ideal code length of `values` under the integer tables, in bits; escapes
// account for their LEB128 payload
inline double table_bits(const std::vector<int32_t>& values,
                         const coding_table& tables) {
    check_arg(values.size() == tables.channels.size(),
              "table_bits: value count != channel count");
    double bits = 0;
    for (std::size_t c = 0; c < values.size(); ++c) {
        const channel_table& t = tables.channels[c];
        const std::size_t s = t.symbol_of(values[c]);
        bits -= std::log2(static_cast<double>(t.freq(s)) / cdf_total);
        if (s == t.escape_symbol())
            bits += 8.0 * static_cast<double>(leb128_size(zigzag32(values[c])));
    }
    return bits;
}

}  // namespace pcc
