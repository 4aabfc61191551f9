#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pcc/entropy.hpp"
#include "pcc/range_coder.hpp"
#include "pcc/rng.hpp"

using namespace pcc;

namespace {

// random table: random support around zero, random frequencies
channel_table random_table(rng& r, std::size_t max_symbols = 40) {
    const std::size_t in_range = 1 + r.below(max_symbols);
    std::vector<double> pmf(in_range + 1);  // + escape
    for (auto& p : pmf) p = r.uniform(0.001, 1.0);
    if (r.below(4) == 0) pmf.back() = 1e-9;  // often a near-dead escape
    const int32_t min_v = -static_cast<int32_t>(r.below(20));
    return make_channel_table(std::vector<double>(pmf.begin(), pmf.end() - 1),
                              pmf.back(), min_v);
}

coding_table random_tables(rng& r, std::size_t channels) {
    coding_table t;
    for (std::size_t i = 0; i < channels; ++i) t.channels.push_back(random_table(r));
    return t;
}

std::vector<int32_t> random_values(rng& r, const coding_table& t,
                                   double escape_prob) {
    std::vector<int32_t> v(t.channels.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& ch = t.channels[i];
        if (r.uniform() < escape_prob) {
            // out-of-support value, occasionally huge
            const int32_t mag = r.below(8) == 0
                                    ? static_cast<int32_t>(r.below(1u << 30))
                                    : static_cast<int32_t>(r.below(5000)) + 100000;
            v[i] = r.below(2) ? ch.max_v + 1 + mag : ch.min_v - 1 - mag;
        } else {
            v[i] = ch.min_v + static_cast<int32_t>(
                                  r.below(static_cast<uint64_t>(ch.max_v - ch.min_v + 1)));
        }
    }
    return v;
}

}  // namespace

TEST_CASE("empty symbol vector costs only the flush") {
    coding_table empty;
    const auto bytes = range_encode({}, empty);
    CHECK(bytes.size() <= 8);
    CHECK(range_decode(bytes, empty).empty());
}

TEST_CASE("uniform 16-symbol table codes at 4 bits per symbol") {
    // one channel per symbol position
    coding_table tables;
    std::vector<double> pmf(16, 1.0 / 16);
    rng r(31);
    std::vector<int32_t> values(1000);
    for (auto& v : values) v = static_cast<int32_t>(r.below(16));
    for (std::size_t i = 0; i < values.size(); ++i)
        tables.channels.push_back(make_channel_table(pmf, 0.0, 0));
    const auto bytes = range_encode(values, tables);
    // 1000 symbols * 4 bits = 500 bytes, within 1% plus the coder overhead
    CHECK(std::abs(static_cast<double>(bytes.size()) - 500.0) <= 0.01 * 500 + 8);
    CHECK(range_decode(bytes, tables) == values);
}

TEST_CASE("round trip over 10^4 randomized table/symbol pairs") {
    rng r(32);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t channels = 1 + r.below(24);
        const coding_table tables = random_tables(r, channels);
        const auto values = random_values(r, tables, trial % 5 == 0 ? 0.2 : 0.0);
        const auto bytes = range_encode(values, tables);
        REQUIRE(range_decode(bytes, tables) == values);
    }
}

TEST_CASE("payload length stays within 64 bits of the table entropy") {
    rng r(33);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t channels = 1 + r.below(1024);
        const coding_table tables = random_tables(r, channels);
        const auto values = random_values(r, tables, 0.01);
        const auto bytes = range_encode(values, tables);
        const double ideal = table_bits(values, tables);
        const double actual = 8.0 * static_cast<double>(bytes.size());
        REQUIRE(std::abs(actual - ideal) <= 64.0);
        REQUIRE(static_cast<double>(bytes.size()) <= ideal / 8.0 + 8.0);
    }
}

TEST_CASE("streams are deterministic and truncation is detected") {
    rng r(34);
    const coding_table tables = random_tables(r, 12);
    const auto values = random_values(r, tables, 0.1);
    const auto a = range_encode(values, tables);
    const auto b = range_encode(values, tables);
    CHECK(a == b);
    auto truncated = a;
    truncated.resize(truncated.size() / 2);
    CHECK_THROWS_AS(range_decode(truncated, tables), std::runtime_error);
}

TEST_CASE("corrupt tables are rejected") {
    channel_table t;
    t.min_v = 0;
    t.max_v = 1;
    t.cdf = {0, 100, 100, 65536};  // non-increasing step
    CHECK_THROWS_AS(t.validate(), std::runtime_error);
}

TEST_CASE("zigzag and LEB128 escapes round-trip extreme values") {
    CHECK(unzigzag32(zigzag32(0)) == 0);
    CHECK(unzigzag32(zigzag32(-1)) == -1);
    CHECK(unzigzag32(zigzag32(1 << 30)) == (1 << 30));
    CHECK(unzigzag32(zigzag32(-(1 << 30))) == -(1 << 30));
    std::vector<double> pmf = {0.5, 0.5};
    coding_table tables;
    tables.channels.push_back(make_channel_table(pmf, 0.1, 0));
    for (int32_t v : {1 << 30, -(1 << 30), 123456, -99}) {
        const auto bytes = range_encode({v}, tables);
        CHECK(range_decode(bytes, tables) == std::vector<int32_t>{v});
    }
}

TEST_CASE("golden bitstream bytes") {
    // regression pin: fixed table, fixed symbols, frozen byte output
    std::vector<double> pmf = {0.5, 0.25, 0.125, 0.0625, 0.0625};
    coding_table tables;
    for (int i = 0; i < 8; ++i) tables.channels.push_back(make_channel_table(pmf, 0.0, -2));
    const std::vector<int32_t> values = {0, -2, -1, 2, 1, 0, -2, 2};
    const auto bytes = range_encode(values, tables);
    // frozen from the first verified implementation run
    const std::vector<uint8_t> golden = {0x00, 0xcb, 0xf7, 0xe8, 0xee, 0xe1, 0x11};
    if (bytes != golden) {
        std::string got = "got bytes:";
        for (uint8_t b : bytes) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), " %02x", b);
            got += buf;
        }
        FAIL(got);
    }
    CHECK(range_decode(bytes, tables) == values);
}
