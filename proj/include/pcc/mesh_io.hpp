#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "pcc/common.hpp"
#include "pcc/serialize.hpp"

// OFF mesh reader. Handles the standard layout and the malformed header
// variant found in ModelNet40, where the counts are fused onto the first
// line ("OFF492 629 0"). Polygon faces are fan-triangulated.

namespace pcc {

struct mesh {
    std::vector<std::array<float, 3>> vertices;
    std::vector<std::array<uint32_t, 3>> faces;
};

namespace detail {

struct line_scanner {
    std::string_view text;
    std::size_t pos = 0;
    std::size_t line_no = 0;

    // next non-empty, non-comment line
    bool next(std::string_view& out) {
        while (pos < text.size()) {
            std::size_t e = text.find('\n', pos);
            if (e == std::string_view::npos) e = text.size();
            std::string_view line = text.substr(pos, e - pos);
            pos = e + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            std::size_t hash = line.find('#');
            if (hash != std::string_view::npos) line = line.substr(0, hash);
            std::size_t b = line.find_first_not_of(" \t");
            if (b == std::string_view::npos) continue;
            std::size_t l = line.find_last_not_of(" \t");
            out = line.substr(b, l - b + 1);
            return true;
        }
        return false;
    }
};

struct token_scanner {
    std::string_view line;
    std::size_t pos = 0;

    bool next(std::string_view& out) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
        if (pos >= line.size()) return false;
        std::size_t b = pos;
        while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
        out = line.substr(b, pos - b);
        return true;
    }
};

inline double parse_number(std::string_view tok, std::size_t line_no) {
    char buf[64];
    check(tok.size() < sizeof(buf), "off: line " + std::to_string(line_no) +
                                        ": token too long");
    std::memcpy(buf, tok.data(), tok.size());
    buf[tok.size()] = '\0';
    char* endp = nullptr;
    const double v = std::strtod(buf, &endp);
    check(endp == buf + tok.size(), "off: line " + std::to_string(line_no) +
                                        ": expected number, got '" +
                                        std::string(tok) + "'");
    return v;
}

inline long parse_int(std::string_view tok, std::size_t line_no) {
    char buf[64];
    check(tok.size() < sizeof(buf), "off: line " + std::to_string(line_no) +
                                        ": token too long");
    std::memcpy(buf, tok.data(), tok.size());
    buf[tok.size()] = '\0';
    char* endp = nullptr;
    const long v = std::strtol(buf, &endp, 10);
    check(endp == buf + tok.size(), "off: line " + std::to_string(line_no) +
                                        ": expected integer, got '" +
                                        std::string(tok) + "'");
    return v;
}

}  // namespace detail

inline mesh parse_off(std::string_view text) {
    detail::line_scanner lines{text};
    std::string_view line;
    check(lines.next(line), "off: empty file");

    long nv = -1, nf = -1;
    check(line.substr(0, 3) == "OFF", "off: line " + std::to_string(lines.line_no) +
                                          ": missing OFF header");
    std::string_view rest = line.substr(3);
    if (!rest.empty()) {
        // fused header: counts follow immediately after "OFF"
        detail::token_scanner toks{rest};
        std::string_view tok;
        check(toks.next(tok), "off: malformed fused header");
        nv = detail::parse_int(tok, lines.line_no);
        check(toks.next(tok), "off: malformed fused header");
        nf = detail::parse_int(tok, lines.line_no);
    } else {
        check(lines.next(line), "off: missing count line");
        detail::token_scanner toks{line};
        std::string_view tok;
        check(toks.next(tok), "off: malformed count line");
        nv = detail::parse_int(tok, lines.line_no);
        check(toks.next(tok), "off: malformed count line");
        nf = detail::parse_int(tok, lines.line_no);
    }
    check(nv >= 0 && nf >= 0, "off: negative element counts");

    mesh m;
    m.vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        check(lines.next(line), "off: unexpected end of file in vertex list");
        detail::token_scanner toks{line};
        std::array<float, 3> v{};
        for (int k = 0; k < 3; ++k) {
            std::string_view tok;
            check(toks.next(tok), "off: line " + std::to_string(lines.line_no) +
                                      ": vertex needs 3 coordinates");
            v[k] = static_cast<float>(detail::parse_number(tok, lines.line_no));
        }
        m.vertices.push_back(v);
    }

    for (long i = 0; i < nf; ++i) {
        check(lines.next(line), "off: unexpected end of file in face list");
        detail::token_scanner toks{line};
        std::string_view tok;
        check(toks.next(tok), "off: line " + std::to_string(lines.line_no) +
                                  ": empty face line");
        const long k = detail::parse_int(tok, lines.line_no);
        check(k >= 3, "off: line " + std::to_string(lines.line_no) +
                          ": face needs at least 3 vertices");
        std::vector<uint32_t> idx(static_cast<std::size_t>(k));
        for (long j = 0; j < k; ++j) {
            check(toks.next(tok), "off: line " + std::to_string(lines.line_no) +
                                      ": face index list too short");
            const long v = detail::parse_int(tok, lines.line_no);
            check(v >= 0 && v < nv, "off: line " + std::to_string(lines.line_no) +
                                        ": vertex index " + std::to_string(v) +
                                        " out of range");
            idx[static_cast<std::size_t>(j)] = static_cast<uint32_t>(v);
        }
        for (long j = 1; j + 1 < k; ++j)  // fan split
            m.faces.push_back({idx[0], idx[static_cast<std::size_t>(j)],
                               idx[static_cast<std::size_t>(j + 1)]});
    }
    return m;
}

inline mesh load_off_file(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file(path);
    return parse_off(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline void write_off_file(const std::string& path, const mesh& m) {
    std::string out = "OFF\n";
    out += std::to_string(m.vertices.size()) + " " + std::to_string(m.faces.size()) +
           " 0\n";
    char buf[96];
    for (const auto& v : m.vertices) {
        std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", v[0], v[1], v[2]);
        out += buf;
    }
    for (const auto& f : m.faces) {
        std::snprintf(buf, sizeof(buf), "3 %u %u %u\n", f[0], f[1], f[2]);
        out += buf;
    }
    std::vector<uint8_t> bytes(out.begin(), out.end());
    write_file(path, bytes);
}

}  // namespace pcc
