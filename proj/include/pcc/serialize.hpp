#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pcc/common.hpp"

namespace pcc {

// Little-endian binary writer/reader over a byte vector. All on-disk formats
// (datasets, checkpoints, bitstreams) go through these, so layouts are
// identical on every platform.

struct byte_writer {
    std::vector<uint8_t> bytes;

    void u8(uint8_t v) { bytes.push_back(v); }
    void u16(uint16_t v) {
        bytes.push_back(static_cast<uint8_t>(v));
        bytes.push_back(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        check_arg(s.size() <= 0xFFFF, "string too long to serialize");
        u16(static_cast<uint16_t>(s.size()));
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    void raw(const uint8_t* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }
};

struct byte_reader {
    const uint8_t* p;
    const uint8_t* end;

    byte_reader(const uint8_t* data, std::size_t n) : p(data), end(data + n) {}
    explicit byte_reader(const std::vector<uint8_t>& v) : byte_reader(v.data(), v.size()) {}

    std::size_t remaining() const { return static_cast<std::size_t>(end - p); }

    void need(std::size_t n) const {
        check(remaining() >= n, "truncated input: needed " + std::to_string(n) +
                                    " bytes, have " + std::to_string(remaining()));
    }

    uint8_t u8() {
        need(1);
        return *p++;
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
        p += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        p += 8;
        return v;
    }
    int32_t i32() { return static_cast<int32_t>(u32()); }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        uint16_t n = u16();
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        return s;
    }
    void raw(uint8_t* out, std::size_t n) {
        need(n);
        std::memcpy(out, p, n);
        p += n;
    }
};

inline void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    check(f.good(), "cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    check(f.good(), "write failed: " + path);
}

inline std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    check(f.good(), "cannot open: " + path);
    auto n = static_cast<std::size_t>(f.tellg());
    f.seekg(0);
    std::vector<uint8_t> bytes(n);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    check(f.good(), "read failed: " + path);
    return bytes;
}

}  // namespace pcc
