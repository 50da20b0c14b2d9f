#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <string>
#include <vector>

#include "llvit/config_io.hpp"
#include "llvit/int_infer.hpp"
#include "llvit/netlist.hpp"
#include "llvit/version.hpp"
#include "netlist_ref.hpp"
#include "test_util.hpp"

using namespace llvit;
using nlohmann::json;

namespace {

struct ExportFixture {
    Dataset ds;
    Model model;
    IntModel im;
    std::string config_json;
    std::string netlist;

    ExportFixture()
        : ds(testutil::random_dataset(96, 8, 8, 1, 4, 121)), model(testutil::tiny_lut_config()) {
        model.calibrate(normalized_batch(ds, 0, 64));
        im = quantize_model(model, ds, 64, 4);
        RunConfig rc;
        rc.model = testutil::tiny_lut_config();
        config_json = run_config_to_json(rc);
        netlist = netlist_json(im, config_json);
    }
};

}  // namespace

TEST_CASE("netlist embeds the tool version and the full run config") {
    ExportFixture fx;
    json j = json::parse(fx.netlist);
    CHECK(j.at("version").get<std::string>() == kToolVersion);
    CHECK(j.at("config") == json::parse(fx.config_json));
    CHECK(j.at("dim").get<int64_t>() == 16);
    CHECK(j.at("residual_scale").get<float>() == fx.im.s_res);
    REQUIRE(j.at("blocks").size() == 2);
}

TEST_CASE("truth-table hex rows have exactly 2^n / 4 digits, lowercase") {
    ExportFixture fx;
    json j = json::parse(fx.netlist);
    for (const auto& block : j.at("blocks")) {
        for (const auto& layer : block.at("layers")) {
            const int fan_in = layer.at("fan_in").get<int>();
            for (const auto& t : layer.at("tables")) {
                const std::string hex = t.get<std::string>();
                CHECK(hex.size() == static_cast<size_t>((1 << fan_in) / 4));
                for (char c : hex) CHECK(((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')));
            }
        }
    }
}

TEST_CASE("hex digit k covers addresses 4k..4k+3, low address in the low bit") {
    BitTensor table(1, 8);
    table.set(0, 0, true);   // address 0 -> digit 0, bit 0
    table.set(0, 5, true);   // address 5 -> digit 1, bit 1
    table.set(0, 7, true);   // address 7 -> digit 1, bit 3
    CHECK(truth_table_hex(table, 0) == "1a");
}

TEST_CASE("re-imported netlist reproduces the integer mixer bit-exactly on 100 tokens") {
    ExportFixture fx;
    json j = json::parse(fx.netlist);
    const int64_t d = fx.im.cfg.dim;
    Rng rng(122);

    for (int block = 0; block < 2; ++block) {
        intref::SerialLutMixer serial =
            intref::mixer_from_json(j.at("blocks").at(static_cast<size_t>(block)), d);
        IntLayerNorm norm =
            intref::norm_from_json(j.at("blocks").at(static_cast<size_t>(block)).at("norm"));

        Tensor tokens = Tensor::zeros({100, d}, Dtype::i8);
        for (int64_t i = 0; i < tokens.numel(); ++i)
            tokens.i8()[i] = static_cast<int8_t>(rng.index(255)) - 127;

        // core accumulators, straight from the packed model
        Tensor h = Tensor::zeros({100, d}, Dtype::i8);
        for (int64_t r = 0; r < 100; ++r)
            fx.im.blocks[static_cast<size_t>(block)].lut_mixer.norm.run_row(
                tokens.i8() + r * d, d, h.i8() + r * d);
        Tensor acc = fx.im.mixer_core(block, h);
        Tensor full = fx.im.mixer_forward(block, tokens);

        int64_t mismatches = 0;
        for (int64_t r = 0; r < 100; ++r) {
            // the file's own norm constants must reproduce the packed norm
            std::vector<int8_t> h_ref(static_cast<size_t>(d));
            norm.run_row(tokens.i8() + r * d, d, h_ref.data());
            for (int64_t i = 0; i < d; ++i)
                if (h_ref[static_cast<size_t>(i)] != h.i8()[r * d + i]) ++mismatches;

            const std::vector<int32_t> want = intref::serial_mixer_core(serial, h_ref.data());
            for (int64_t ch = 0; ch < d; ++ch) {
                if (want[static_cast<size_t>(ch)] != acc.i32()[r * d + ch]) ++mismatches;
                const int8_t out = intref::serial_mixer_output(
                    serial, ch, want[static_cast<size_t>(ch)], tokens.i8()[r * d + ch]);
                if (out != full.i8()[r * d + ch]) ++mismatches;
            }
        }
        CHECK(mismatches == 0);
    }
}

TEST_CASE("netlist bytes are deterministic for a fixed model") {
    ExportFixture fx;
    CHECK(netlist_json(fx.im, fx.config_json) == fx.netlist);
}

TEST_CASE("an mlp-mixer model has nothing to export") {
    Dataset ds = testutil::random_dataset(64, 8, 8, 1, 4, 123);
    Model model(testutil::tiny_mlp_config());
    IntModel im = quantize_model(model, ds, 48, 4);
    try {
        netlist_json(im, "{}");
        FAIL("expected UsageError");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("mlp") != std::string::npos);
    }
}
