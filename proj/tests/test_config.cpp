#include <string>

#include "doctest.h"
#include "himoe/config.hpp"
#include "himoe/errors.hpp"

using namespace himoe;

TEST_CASE("key=value parsing with comments and whitespace") {
    const std::string text =
        "# training setup\n"
        "seed = 7\n"
        "epochs=12   # inline comment\n"
        "\n"
        "moe.modality_experts = 3\n"
        "align.tau = 0.25\n";
    const auto kv = parse_config_text(text);
    const RunConfig cfg = RunConfig::from_map(kv);
    CHECK(cfg.seed == 7);
    CHECK(cfg.epochs == 12);
    CHECK(cfg.modality_experts == 3);
    CHECK(cfg.align_tau == doctest::Approx(0.25));
}

TEST_CASE("unknown keys are rejected with their names") {
    auto kv = parse_config_text("seed = 1\nmystery.knob = 3\n");
    try {
        RunConfig::from_map(kv);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("mystery.knob") != std::string::npos);
    }
}

TEST_CASE("overrides replace file values") {
    auto kv = parse_config_text("epochs = 10\n");
    apply_override(kv, "epochs=20");
    apply_override(kv, "loss.lambda=0.5");
    const RunConfig cfg = RunConfig::from_map(kv);
    CHECK(cfg.epochs == 20);
    CHECK(cfg.loss_lambda == doctest::Approx(0.5));
}

TEST_CASE("per-dimension head modes resolve against dataset dimensions") {
    auto kv = parse_config_text("heads.mode = regression\nheads.mode.arousal = binary\n");
    const RunConfig cfg = RunConfig::from_map(kv);
    const auto modes = cfg.head_modes_for({"valence", "arousal"});
    CHECK(modes[0] == HeadMode::kRegression);
    CHECK(modes[1] == HeadMode::kBinary);
    CHECK_THROWS_AS(cfg.head_modes_for({"valence"}), ConfigError);
}

TEST_CASE("validation rejects nonsense values") {
    CHECK_THROWS_AS(RunConfig::from_map(parse_config_text("epochs = 0\n")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_map(parse_config_text("align.tau = -1\n")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_map(parse_config_text("missing.rate = 1.5\n")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_map(parse_config_text("model = fancy\n")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_map(parse_config_text("heads.mode = softmax\n")), ConfigError);
}

TEST_CASE("run manifest echoes raw values verbatim") {
    auto kv = parse_config_text("seed = 0042\nepochs = 5\n");
    const RunConfig cfg = RunConfig::from_map(kv);
    const std::string manifest = cfg.run_manifest_json();
    CHECK(manifest.find("\"seed\": \"0042\"") != std::string::npos);
    CHECK(manifest.find("\"epochs\": \"5\"") != std::string::npos);
}

TEST_CASE("synth modality lists expand per modality") {
    auto kv = parse_config_text(
        "synth.modalities = 3\n"
        "synth.names = eeg,pps,face\n"
        "synth.d_raw = 4,5,6\n"
        "synth.lags_s = 0,0.5,1\n"
        "synth.noise_std = 0.01,0.02,0.03\n"
        "synth.sample_rate = 8\n");
    const RunConfig cfg = RunConfig::from_map(kv);
    REQUIRE(cfg.synth.modalities.size() == 3);
    CHECK(cfg.synth.modalities[1].name == "pps");
    CHECK(cfg.synth.modalities[2].d_raw == 6);
    CHECK(cfg.synth.modalities[1].lag_steps == 4);  // 0.5 s at 8 Hz
    CHECK(cfg.synth.modalities[0].noise_std == doctest::Approx(0.01));
}

TEST_CASE("missing rates parse as a grid") {
    auto kv = parse_config_text("missing.rates = 0,0.1,0.2\n");
    const RunConfig cfg = RunConfig::from_map(kv);
    REQUIRE(cfg.missing_rates.size() == 3);
    CHECK(cfg.missing_rates[2] == doctest::Approx(0.2));
}
