#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "pcc/bitstream.hpp"
#include "pcc/checkpoint.hpp"
#include "pcc/codec.hpp"
#include "pcc/rng.hpp"

using namespace pcc;

namespace {

tensor<float> random_cloud(rng& r, std::size_t points) {
    tensor<float> t({3, points});
    for (auto& v : t.data) v = static_cast<float>(r.uniform(-1.0, 1.0));
    return t;
}

pointnet_codec<float> make_model(const char* name, uint64_t seed) {
    auto m = pointnet_codec<float>::create(make_codec_config(name, 64), seed);
    rng r(seed + 1);
    for (auto& bn : m.enc_bn) {
        for (auto& v : bn.running_mean.data) v = static_cast<float>(r.uniform(-0.3, 0.3));
        for (auto& v : bn.running_var.data) v = static_cast<float>(r.uniform(0.3, 2.0));
    }
    return m;
}

}  // namespace

TEST_CASE("stream header layout is byte-exact") {
    stream_header h;
    h.version = 1;
    h.config_id = 2;
    h.latent = 16;
    h.points = 1024;
    h.payload_bytes = 0x0102;
    byte_writer w;
    write_stream_header(w, h);
    // layout computed by hand from the documented byte offsets
    const std::vector<uint8_t> expect = {'P', 'C',  'C',  'C',  0x01, 0x02, 0x10, 0x00,
                                         0x00, 0x04, 0x00, 0x00, 0x02, 0x01, 0x00, 0x00};
    REQUIRE(w.bytes == expect);
    byte_reader r(w.bytes);
    const stream_header back = read_stream_header(r);
    CHECK(back.config_id == 2);
    CHECK(back.latent == 16);
    CHECK(back.points == 1024);
    CHECK(back.payload_bytes == 0x0102);
}

TEST_CASE("compress/decompress equals the direct in-memory path bitwise") {
    rng r(61);
    auto m = make_model("micro", 62);
    const coding_table tables = build_tables(m.store, m.prior);
    for (int trial = 0; trial < 100; ++trial) {
        const tensor<float> x = random_cloud(r, 1 + r.below(50));
        const auto stream = compress_cloud(m, tables, x);
        const auto dec = decompress_cloud(m, tables, stream);
        // direct path
        const auto y = m.analyze_one(x);
        const auto q = quantize_latent(y);
        REQUIRE(dec.latent == q);
        tensor<float> yhat({m.cfg.latent, 1});
        for (std::size_t i = 0; i < q.size(); ++i) yhat[i] = static_cast<float>(q[i]);
        const auto logits = m.synthesize_one(yhat);
        REQUIRE(std::memcmp(dec.logits.data.data(), logits.data.data(),
                            40 * sizeof(float)) == 0);
    }
}

TEST_CASE("payload bits are bounded") {
    rng r(63);
    auto m = make_model("micro", 64);
    const coding_table tables = build_tables(m.store, m.prior);
    for (int trial = 0; trial < 50; ++trial) {
        const auto stream = compress_cloud(m, tables, random_cloud(r, 1 + r.below(64)));
        const std::size_t bits = payload_bits(stream);
        CHECK(bits <= m.cfg.latent * 32);
        // never below the table-entropy lower bound, and within the coder
        // overhead above it
        const auto latent = decompress_cloud(m, tables, stream).latent;
        const double ideal = table_bits(latent, tables);
        CHECK(static_cast<double>(bits) >= ideal);
        CHECK(static_cast<double>(bits) <= ideal + 64.0);
    }
}

TEST_CASE("streams are byte-identical across runs") {
    rng r(65);
    auto m = make_model("lite", 66);
    const coding_table tables = build_tables(m.store, m.prior);
    const tensor<float> x = random_cloud(r, 40);
    CHECK(compress_cloud(m, tables, x) == compress_cloud(m, tables, x));
}

TEST_CASE("mismatched streams are refused with a diagnostic") {
    rng r(67);
    auto micro = make_model("micro", 68);
    auto lite = make_model("lite", 69);
    const coding_table tm = build_tables(micro.store, micro.prior);
    const auto stream = compress_cloud(micro, tm, random_cloud(r, 30));
    SECTION("config id mismatch") {
        CHECK_THROWS_WITH(decompress_cloud(lite, tm, stream),
                          Catch::Matchers::ContainsSubstring("config mismatch"));
    }
    SECTION("version mismatch") {
        auto bad = stream;
        bad[4] = 99;
        CHECK_THROWS_WITH(decompress_cloud(micro, tm, bad),
                          Catch::Matchers::ContainsSubstring("version"));
    }
    SECTION("bad magic") {
        auto bad = stream;
        bad[0] = 'X';
        CHECK_THROWS(decompress_cloud(micro, tm, bad));
    }
    SECTION("payload length mismatch") {
        auto bad = stream;
        bad.pop_back();
        CHECK_THROWS_WITH(decompress_cloud(micro, tm, bad),
                          Catch::Matchers::ContainsSubstring("payload length"));
    }
    SECTION("P mismatch") {
        auto other = pointnet_codec<float>::create(make_codec_config("micro", 128), 68);
        CHECK_THROWS_WITH(decompress_cloud(other, tm, stream),
                          Catch::Matchers::ContainsSubstring("P ="));
    }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    rng r(70);
    auto m = make_model("lite", 71);
    const coding_table tables = build_tables(m.store, m.prior);
    const auto bytes = save_checkpoint(m, tables, 1234.5);
    auto ck = load_checkpoint<float>(bytes);
    CHECK(ck.lambda == 1234.5);
    CHECK(ck.model.cfg.name == "lite");
    CHECK(ck.model.cfg.points == 64);

    // every named tensor restored bit-for-bit
    auto orig_state = m.named_state();
    auto load_state = ck.model.named_state();
    REQUIRE(orig_state.size() == load_state.size());
    for (std::size_t i = 0; i < orig_state.size(); ++i) {
        REQUIRE(orig_state[i].first == load_state[i].first);
        REQUIRE(orig_state[i].second->data == load_state[i].second->data);
    }
    // tables identical
    REQUIRE(ck.tables.channels.size() == tables.channels.size());
    for (std::size_t c = 0; c < tables.channels.size(); ++c) {
        CHECK(ck.tables.channels[c].min_v == tables.channels[c].min_v);
        CHECK(ck.tables.channels[c].max_v == tables.channels[c].max_v);
        CHECK(ck.tables.channels[c].cdf == tables.channels[c].cdf);
    }
    // a second save is byte-identical
    CHECK(save_checkpoint(ck.model, ck.tables, ck.lambda) == bytes);

    // streams from the restored model match the original
    const tensor<float> x = random_cloud(r, 25);
    CHECK(compress_cloud(ck.model, ck.tables, x) == compress_cloud(m, tables, x));

    SECTION("corrupt checkpoints are rejected") {
        auto bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS(load_checkpoint<float>(bad));
        auto truncated = bytes;
        truncated.resize(truncated.size() - 7);
        CHECK_THROWS(load_checkpoint<float>(truncated));
    }
}
