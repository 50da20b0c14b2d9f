#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>
#include <string>

#include "llvit/errors.hpp"
#include "llvit/stats.hpp"

using namespace llvit;

namespace {

// 224x224x3, 16x16 patches, width 192, 12 encoders: the standard tiny
// vision-transformer geometry all the headline numbers refer to
ModelConfig dense_tiny(int classes = 1000) {
    ModelConfig cfg;
    cfg.image_size = 224;
    cfg.patch_size = 16;
    cfg.channels = 3;
    cfg.dim = 192;
    cfg.heads = 3;
    cfg.depth = 12;
    cfg.num_classes = classes;
    cfg.mixer.kind = MixerKind::mlp;
    cfg.mixer.hidden_ratio = 4;
    return cfg;
}

ModelConfig lut_tiny(int classes = 10) {
    ModelConfig cfg = dense_tiny(classes);
    cfg.mixer.kind = MixerKind::lut;
    cfg.mixer.therm_bits = 8;
    cfg.mixer.widths = {768, 192};
    cfg.mixer.fan_in = 6;
    return cfg;
}

}  // namespace

TEST_CASE("per-family parameter counts at the tiny dense geometry are exact") {
    CostReport rep = cost_report(dense_tiny());
    CHECK(rep.rows.at("qkv").params == 1327104);     // 12 * 3 * 192^2
    CHECK(rep.rows.at("concat").params == 442368);   // 12 * 192^2
    CHECK(rep.rows.at("ff1").params == 1769472);     // 12 * 192 * 768
    CHECK(rep.rows.at("ff2").params == 1769472);
    CHECK(rep.rows.at("qkT").params == 0);           // activation-only stages
    CHECK(rep.rows.at("softmaxV").params == 0);
}

TEST_CASE("per-family MAC counts per image at the tiny dense geometry are exact") {
    CostReport rep = cost_report(dense_tiny());
    CHECK(rep.rows.at("qkv").macs == 261439488);     // 197 tokens
    CHECK(rep.rows.at("qkT").macs == 89415936);      // 12 * 3 * 197^2 * 64
    CHECK(rep.rows.at("softmaxV").macs == 89415936);
    CHECK(rep.rows.at("concat").macs == 87146496);
    CHECK(rep.rows.at("ff1").macs == 348585984);
    CHECK(rep.rows.at("ff2").macs == 348585984);
    CHECK(rep.rows.at("embed").macs == 28901376);    // 196 * 768 * 192
    CHECK(rep.rows.at("head").macs == 192000);
    // encoder totals are the sum of the attention + mixer families
    CHECK(rep.encoder_total().params == 5308416);
    CHECK(rep.encoder_total().macs == 1224589824);
}

TEST_CASE("mixer families dominate the dense model: the headline shares") {
    MixerShare share = mixer_share(dense_tiny());
    CHECK(share.param_share == doctest::Approx(0.620991).epsilon(1e-4));
    CHECK(share.mac_share == doctest::Approx(0.556099).epsilon(1e-4));
}

TEST_CASE("lut variant: mixer weights shrink to narrow codes and table bits") {
    CostReport rep = cost_report(lut_tiny());
    // latent entries (768+192)*64 per block, 192*192 encoded values, 192*8
    // thermometer thresholds
    CHECK(rep.rows.at("lut-mixer").params == 12 * ((768 + 192) * 64 + 192 * 192 + 192 * 8));
    CHECK(rep.rows.at("lut-mixer").params == 1198080);
    // deployed bytes: 1 bit per table entry, int4 per encoded value, int8
    // thresholds
    const int64_t table_bits = (768 + 192) * 64;
    const int64_t per_block_bytes = table_bits / 8 + 192 * 192 / 2 + 192 * 8;
    CHECK(rep.rows.at("lut-mixer").bytes == 12 * per_block_bytes);
    CHECK(rep.rows.at("lut-mixer").bytes == 331776);
    CHECK(rep.rows.at("lut-mixer").macs == 0);
    CHECK(rep.rows.at("ff1").macs == 0);
    // additions and the one requant multiply per output are tracked apart
    CHECK(rep.condsum_adds == int64_t{12} * 197 * 192 * 192);
    CHECK(rep.condsum_adds == 87146496);
    CHECK(rep.requant_mults == int64_t{12} * 197 * 192);
    CHECK(rep.requant_mults == 453888);
    CHECK(rep.rows.at("head").params == 1920);
    CHECK(rep.encoder_total().params == 2967552);
    CHECK(rep.encoder_total().macs == 527417856);
    CHECK(rep.encoder_total().bytes == 2101248);
    CHECK(rep.full_total().params == 3154944);
    CHECK(rep.full_total().macs == 556321152);
    CHECK(rep.full_total().bytes == 2288640);
}

TEST_CASE("reduction summary reproduces the headline claims") {
    CostReport ours = cost_report(lut_tiny());
    CostReport base = cost_report(dense_tiny(10));
    ReductionSummary red = reduction_summary(ours, base);
    CHECK(red.weight_reduction_bytes == doctest::Approx(0.604167).epsilon(1e-4));
    CHECK(red.weight_reduction_params == doctest::Approx(0.440972).epsilon(1e-4));
    CHECK(red.mac_reduction == doctest::Approx(0.56894).epsilon(1e-4));
    CHECK(red.ours_encoder_mib == doctest::Approx(2.00391).epsilon(1e-4));
    CHECK(red.baseline_encoder_mib == doctest::Approx(5.0625).epsilon(1e-4));
    // the claims we stand behind
    CHECK(red.weight_reduction_bytes >= 0.60);
    CHECK(red.mac_reduction >= 0.50);
}

TEST_CASE("reduction summary refuses mismatched geometries") {
    CostReport ours = cost_report(lut_tiny());
    ModelConfig other = dense_tiny(10);
    other.depth = 6;
    CostReport base = cost_report(other);
    CHECK_THROWS_AS(reduction_summary(ours, base), UsageError);
}

TEST_CASE("whole-model MAC accounting under both conventions") {
    GmacSummary g = gmac_summary(lut_tiny());
    CHECK(g.encoder_gmacs == doctest::Approx(0.527872).epsilon(1e-4));
    CHECK(g.model_gmacs == doctest::Approx(0.556775).epsilon(1e-4));
    CHECK(g.model_gmacs_with_adds == doctest::Approx(0.643922).epsilon(1e-4));
    GmacSummary gd = gmac_summary(dense_tiny());
    CHECK(gd.encoder_gmacs == doctest::Approx(1.22459).epsilon(1e-4));
    // no conditional sums in the dense model: both conventions agree
    CHECK(gd.model_gmacs_with_adds == doctest::Approx(gd.model_gmacs).epsilon(1e-9));
}

TEST_CASE("csv emits a header plus one row per layer family") {
    CostReport rep = cost_report(dense_tiny());
    std::istringstream csv(cost_report_csv(rep));
    std::string line;
    int lines = 0;
    int family_rows = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        ++lines;
        if (lines > 1) ++family_rows;
    }
    CHECK(family_rows == static_cast<int>(rep.rows.size()));
}

TEST_CASE("text report contains every family and the totals") {
    CostReport rep = cost_report(lut_tiny());
    const std::string text = cost_report_text(rep);
    for (const auto& [family, row] : rep.rows) {
        CHECK(text.find(family) != std::string::npos);
    }
    CHECK(text.find("encoder-total") != std::string::npos);
    CHECK(text.find("full-total") != std::string::npos);
}

TEST_CASE("byte accounting: dense rows deploy one byte per weight") {
    CostReport rep = cost_report(dense_tiny());
    for (const char* family : {"qkv", "concat", "ff1", "ff2", "embed", "head"}) {
        CHECK(rep.rows.at(family).bytes == rep.rows.at(family).params);
    }
}
