#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "himoe/errors.hpp"
#include "himoe/model.hpp"

using namespace himoe;

namespace {

ModelConfig tiny_config(int modalities = 2) {
    ModelConfig cfg;
    for (int m = 0; m < modalities; ++m) {
        cfg.modality_names.push_back("mod" + std::to_string(m));
        cfg.input_dims.push_back(6);
    }
    cfg.feature_dim = 4;
    cfg.encoder_hidden = 5;
    cfg.modality_experts = 2;
    cfg.emotion_experts = 2;
    cfg.dim_names = {"valence", "arousal"};
    cfg.head_modes = {HeadMode::kRegression, HeadMode::kRegression};
    return cfg;
}

BatchView tiny_batch(int modalities, Rng& rng) {
    BatchView batch;
    batch.rows = 3;
    for (int m = 0; m < modalities; ++m) {
        std::vector<double> data(static_cast<std::size_t>(batch.rows) * 6);
        for (double& v : data) v = rng.uniform(-1, 1);
        batch.features.push_back(Tensor::from_data({batch.rows, 6}, std::move(data)));
    }
    batch.presence.assign(static_cast<std::size_t>(batch.rows) * modalities, 1);
    batch.labels = {3, 7, 5, 2, 8, 4};
    batch.label_mask.assign(6, 1);
    return batch;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel()) return false;
    return std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("masking idempotence: absent pre-mask garbage never reaches any output") {
    for (const std::string kind : {"full", "baseline"}) {
        CAPTURE(kind);
        const ModelConfig cfg = tiny_config(2);
        const auto model = make_model(kind, cfg, 42);
        Rng rng(7);
        BatchView batch = tiny_batch(2, rng);
        batch.presence = {1, 1, 1, 0, 0, 1};  // row1 misses mod1, row2 misses mod0

        const ForwardOut clean = model->forward(batch);

        // overwrite the absent rows with garbage, including non-finite values
        BatchView garbage = batch;
        std::vector<double> f1(batch.features[1].data().begin(), batch.features[1].data().end());
        for (int c = 0; c < 6; ++c) f1[static_cast<std::size_t>(1) * 6 + c] = std::nan("");
        garbage.features[1] = Tensor::from_data({3, 6}, std::move(f1));
        std::vector<double> f0(batch.features[0].data().begin(), batch.features[0].data().end());
        for (int c = 0; c < 6; ++c) f0[static_cast<std::size_t>(2) * 6 + c] = 1e300;
        garbage.features[0] = Tensor::from_data({3, 6}, std::move(f0));

        const ForwardOut dirty = model->forward(garbage);
        for (std::size_t d = 0; d < clean.heads.prediction.size(); ++d) {
            CHECK(bitwise_equal(clean.heads.prediction[d], dirty.heads.prediction[d]));
        }
        CHECK(bitwise_equal(clean.fused, dirty.fused));
        for (std::size_t m = 0; m < clean.encoded.size(); ++m) {
            CHECK(bitwise_equal(clean.encoded[m], dirty.encoded[m]));
        }
    }
}

TEST_CASE("identical construction is deterministic bit for bit") {
    const ModelConfig cfg = tiny_config(2);
    HiMoeModel a(cfg, 7);
    HiMoeModel b(cfg, 7);
    Rng rng(9);
    const BatchView batch = tiny_batch(2, rng);
    const ForwardOut fa = a.forward(batch);
    const ForwardOut fb = b.forward(batch);
    CHECK(bitwise_equal(fa.heads.prediction[0], fb.heads.prediction[0]));
    CHECK(bitwise_equal(fa.fused, fb.fused));
}

TEST_CASE("baseline with one modality pools to exactly the encoder output") {
    const ModelConfig cfg = tiny_config(1);
    BaselineModel model(cfg, 11);
    Rng rng(13);
    const BatchView batch = tiny_batch(1, rng);
    const ForwardOut out = model.forward(batch);
    CHECK(bitwise_equal(out.fused, out.encoded[0]));
}

TEST_CASE("baseline pooling is the zero-imputation mean over all modalities") {
    const ModelConfig cfg = tiny_config(2);
    BaselineModel model(cfg, 11);
    Rng rng(13);
    BatchView batch = tiny_batch(2, rng);
    batch.presence = {1, 0, 1, 1, 1, 1};  // row0 misses mod1
    const ForwardOut out = model.forward(batch);
    // row0: absent modality contributes a zero vector; the mean still divides by M
    for (int c = 0; c < cfg.feature_dim; ++c) {
        CHECK(out.fused.at(0, c) == doctest::Approx(out.encoded[0].at(0, c) / 2.0).epsilon(1e-15));
    }
    for (int c = 0; c < cfg.feature_dim; ++c) {
        const double expected = (out.encoded[0].at(1, c) + out.encoded[1].at(1, c)) / 2.0;
        CHECK(out.fused.at(1, c) == doctest::Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("emotion bank ablation wires fused features straight to the heads") {
    ModelConfig cfg = tiny_config(2);
    cfg.use_emotion_bank = false;
    HiMoeModel model(cfg, 21);
    Rng rng(23);
    const BatchView batch = tiny_batch(2, rng);
    const ForwardOut out = model.forward(batch);
    CHECK(bitwise_equal(out.head_features, out.fused));
    CHECK_FALSE(out.beta.defined());
}

TEST_CASE("checkpoint round-trips every parameter exactly") {
    const ModelConfig cfg = tiny_config(2);
    HiMoeModel model(cfg, 31);
    const auto dir = std::filesystem::temp_directory_path() / "himoe_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string base = (dir / "checkpoint").string();

    const auto params = model.named_params();
    std::vector<std::vector<double>> saved;
    for (const auto& p : params) saved.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    save_checkpoint(params, base);

    for (const auto& p : params) {
        Tensor t = p.tensor;
        for (auto& v : t.mutable_data()) v += 1.5;
    }
    load_checkpoint(params, base);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto data = params[i].tensor.data();
        for (std::size_t j = 0; j < data.size(); ++j) CHECK(data[j] == saved[i][j]);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint shape mismatch raises a format error") {
    const ModelConfig cfg = tiny_config(2);
    HiMoeModel model(cfg, 31);
    const auto dir = std::filesystem::temp_directory_path() / "himoe_ckpt_mismatch";
    std::filesystem::create_directories(dir);
    const std::string base = (dir / "checkpoint").string();
    save_checkpoint(model.named_params(), base);

    ModelConfig bigger = cfg;
    bigger.feature_dim = 8;
    HiMoeModel other(bigger, 31);
    CHECK_THROWS_AS(load_checkpoint(other.named_params(), base), FormatError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("make_batch applies the override mask and repairs all-absent rows") {
    SplitData split;
    split.rows = 2;
    split.modality_names = {"a", "b"};
    split.feature_dims = {2, 2};
    split.features = {{1, 2, 3, 4}, {5, 6, 7, 8}};
    split.presence = {1, 1, 1, 0};
    split.labels = {4.0, 6.0};
    split.label_mask = {1, 1};

    const std::vector<std::uint8_t> override_mask = {0, 0, 1, 1};  // row0 would lose everything
    const BatchView batch = make_batch(split, {0, 1}, &override_mask);
    // row 0: override removed both, repair restores one stored-present modality
    CHECK(batch.presence[0] + batch.presence[1] >= 1);
    // row 1: stored absence of modality b survives the override AND
    CHECK(batch.presence[2] == 1);
    CHECK(batch.presence[3] == 0);
}
