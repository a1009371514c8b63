#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "himoe/errors.hpp"
#include "himoe/modality_moe.hpp"

using namespace himoe;

namespace {

Tensor random_rows(int rows, int dim, Rng& rng) {
    std::vector<double> data(static_cast<std::size_t>(rows) * dim);
    for (double& v : data) v = rng.uniform(-1, 1);
    return Tensor::from_data({rows, dim}, std::move(data));
}

void copy_tensor(const Tensor& src, Tensor dst) {
    auto d = dst.mutable_data();
    std::copy(src.data().begin(), src.data().end(), d.begin());
}

}  // namespace

TEST_CASE("zero input with zero bias routes uniformly") {
    Rng rng(1);
    ModalityBankParams bank = ModalityBankParams::init("m", 4, 3, rng);
    const Tensor alpha = gate_weights(bank, Tensor::zeros({2, 4}));
    for (int r = 0; r < 2; ++r) {
        for (int k = 0; k < 3; ++k) CHECK(alpha.at(r, k) == doctest::Approx(1.0 / 3).epsilon(1e-15));
    }
}

TEST_CASE("zero input with bias [1,0,0] gives the softmax of the bias") {
    Rng rng(2);
    ModalityBankParams bank = ModalityBankParams::init("m", 4, 3, rng);
    bank.gate_b.mutable_data()[0] = 1.0;
    const Tensor alpha = gate_weights(bank, Tensor::zeros({1, 4}));
    const double e = std::exp(1.0);
    CHECK(alpha.at(0, 0) == doctest::Approx(e / (e + 2)).epsilon(1e-12));    // ~0.5761
    CHECK(alpha.at(0, 1) == doctest::Approx(1.0 / (e + 2)).epsilon(1e-12));  // ~0.2119
    CHECK(alpha.at(0, 2) == doctest::Approx(1.0 / (e + 2)).epsilon(1e-12));
}

TEST_CASE("zero-input routing equals softmax(gate_b) bit-exactly") {
    Rng rng(3);
    ModalityBankParams bank = ModalityBankParams::init("m", 6, 4, rng);
    auto b = bank.gate_b.mutable_data();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-2, 2);

    const Tensor alpha = gate_weights(bank, Tensor::zeros({3, 6}));
    const Tensor direct = softmax(reshape(bank.gate_b, {1, 4}));
    for (int r = 0; r < 3; ++r) {
        for (int k = 0; k < 4; ++k) {
            const double a = alpha.at(r, k), d = direct.at(0, k);
            CHECK(std::memcmp(&a, &d, sizeof(double)) == 0);
        }
    }
}

TEST_CASE("gate weights sum to one for 1000 random inputs") {
    Rng rng(4);
    ModalityBankParams bank = ModalityBankParams::init("m", 8, 5, rng);
    const Tensor x = random_rows(1000, 8, rng);
    const Tensor alpha = gate_weights(bank, x);
    for (int r = 0; r < 1000; ++r) {
        double acc = 0.0;
        for (int k = 0; k < 5; ++k) acc += alpha.at(r, k);
        CHECK(std::abs(acc - 1.0) <= 1e-12);
    }
}

TEST_CASE("one-hot routing selects exactly one expert") {
    Rng rng(5);
    ModalityBankParams bank = ModalityBankParams::init("m", 4, 3, rng);
    const Tensor x = random_rows(2, 4, rng);
    const Tensor alpha = Tensor::from_data({2, 3}, {0, 1, 0, 0, 1, 0});
    const Tensor mixed = expert_mix(bank, x, alpha);
    const Tensor direct = bank.expert_nets[1].forward(x);
    for (std::size_t i = 0; i < mixed.numel(); ++i) CHECK(mixed.data()[i] == direct.data()[i]);
}

TEST_CASE("identical experts make the mixture independent of routing") {
    Rng rng(6);
    ModalityBankParams bank = ModalityBankParams::init("m", 4, 3, rng);
    for (int k = 1; k < 3; ++k) {
        copy_tensor(bank.expert_nets[0].w1, bank.expert_nets[static_cast<std::size_t>(k)].w1);
        copy_tensor(bank.expert_nets[0].b1, bank.expert_nets[static_cast<std::size_t>(k)].b1);
        copy_tensor(bank.expert_nets[0].w2, bank.expert_nets[static_cast<std::size_t>(k)].w2);
        copy_tensor(bank.expert_nets[0].b2, bank.expert_nets[static_cast<std::size_t>(k)].b2);
    }
    const Tensor x = random_rows(3, 4, rng);
    const Tensor alpha = softmax(random_rows(3, 3, rng));
    const Tensor mixed = expert_mix(bank, x, alpha);
    const Tensor direct = bank.expert_nets[0].forward(x);
    for (std::size_t i = 0; i < mixed.numel(); ++i) {
        CHECK(mixed.data()[i] == doctest::Approx(direct.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("gate and expert gradients match finite differences") {
    Rng rng(7);
    ModalityBankParams bank = ModalityBankParams::init("m", 4, 2, rng);
    const Tensor x = random_rows(3, 4, rng);
    const auto loss = [&] { return sum_all(expert_mix(bank, x, gate_weights(bank, x))); };
    const auto report = finite_diff_check(loss, bank.named_params("bank"), 1e-5);
    CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("expert permutation with matching gate rows leaves the output unchanged") {
    Rng rng(8);
    ModalityBankParams bank = ModalityBankParams::init("m", 5, 4, rng);
    auto gb = bank.gate_b.mutable_data();
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = rng.uniform(-1, 1);
    const Tensor x = random_rows(6, 5, rng);
    const Tensor out = expert_mix(bank, x, gate_weights(bank, x));

    // permutation (0 1 2 3) -> (2 0 3 1), applied to experts and gate rows
    const std::vector<int> perm = {2, 0, 3, 1};
    ModalityBankParams permuted = ModalityBankParams::init("m", 5, 4, rng);
    for (int k = 0; k < 4; ++k) {
        const auto& src = bank.expert_nets[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
        copy_tensor(src.w1, permuted.expert_nets[static_cast<std::size_t>(k)].w1);
        copy_tensor(src.b1, permuted.expert_nets[static_cast<std::size_t>(k)].b1);
        copy_tensor(src.w2, permuted.expert_nets[static_cast<std::size_t>(k)].w2);
        copy_tensor(src.b2, permuted.expert_nets[static_cast<std::size_t>(k)].b2);
        for (int c = 0; c < 5; ++c) {
            permuted.gate_w.mutable_data()[static_cast<std::size_t>(k) * 5 + c] =
                bank.gate_w.data()[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)]) * 5 + c];
        }
        permuted.gate_b.mutable_data()[static_cast<std::size_t>(k)] =
            bank.gate_b.data()[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
    }
    const Tensor out_p = expert_mix(permuted, x, gate_weights(permuted, x));
    for (std::size_t i = 0; i < out.numel(); ++i) {
        CHECK(out.data()[i] == doctest::Approx(out_p.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("fusion over a single modality returns its token") {
    Rng rng(9);
    FusionParams fp = FusionParams::init(4, 1, rng);
    const Tensor z = random_rows(3, 4, rng);
    const std::vector<std::uint8_t> presence(3, 1);
    const FusionOut out = fuse({z}, presence, fp);
    for (int r = 0; r < 3; ++r) {
        CHECK(out.weights.at(r, 0) == 1.0);
        for (int c = 0; c < 4; ++c) {
            const double expected = z.at(r, c) + fp.present_embed[0].data()[static_cast<std::size_t>(c)];
            CHECK(out.fused.at(r, c) == doctest::Approx(expected).epsilon(1e-15));
        }
    }
}

TEST_CASE("identical tokens fuse to themselves regardless of the query") {
    Rng rng(10);
    FusionParams fp = FusionParams::init(4, 3, rng);
    // same embedding for every modality so all tokens coincide
    for (int m = 1; m < 3; ++m) {
        copy_tensor(fp.present_embed[0], fp.present_embed[static_cast<std::size_t>(m)]);
    }
    const Tensor z = random_rows(2, 4, rng);
    const std::vector<std::uint8_t> presence(static_cast<std::size_t>(2) * 3, 1);
    const FusionOut out = fuse({z, z, z}, presence, fp);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 4; ++c) {
            const double expected = z.at(r, c) + fp.present_embed[0].data()[static_cast<std::size_t>(c)];
            CHECK(out.fused.at(r, c) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("all-absent row is a contract error in fuse") {
    Rng rng(11);
    FusionParams fp = FusionParams::init(4, 2, rng);
    const Tensor z = random_rows(1, 4, rng);
    CHECK_THROWS_AS(fuse({z, z}, {0, 0}, fp), ContractError);
}

TEST_CASE("bank forward: masking equals zeroing, becomes presence-aware") {
    Rng rng(12);
    const int rows = 4, d = 5, m_count = 2;
    std::vector<ModalityBankParams> banks;
    banks.push_back(ModalityBankParams::init("a", d, 3, rng));
    banks.push_back(ModalityBankParams::init("b", d, 3, rng));
    FusionParams fp = FusionParams::init(d, m_count, rng);

    const Tensor za = random_rows(rows, d, rng);
    const Tensor zb = random_rows(rows, d, rng);
    std::vector<std::uint8_t> presence = {1, 1, 1, 0, 1, 1, 0, 1};  // rows 1,3 miss modality b/a

    const ModalityBankOut out1 = modality_bank_forward(banks, fp, {za, zb}, presence);

    // zero the absent rows by hand: outputs must be bit-identical
    std::vector<double> zb_zeroed(zb.data().begin(), zb.data().end());
    for (int c = 0; c < d; ++c) zb_zeroed[static_cast<std::size_t>(1) * d + c] = 0.0;
    std::vector<double> za_zeroed(za.data().begin(), za.data().end());
    for (int c = 0; c < d; ++c) za_zeroed[static_cast<std::size_t>(3) * d + c] = 0.0;
    const ModalityBankOut out2 = modality_bank_forward(
        banks, fp, {Tensor::from_data({rows, d}, za_zeroed), Tensor::from_data({rows, d}, zb_zeroed)},
        presence);
    for (std::size_t i = 0; i < out1.fused.numel(); ++i) {
        const double a = out1.fused.data()[i], b = out2.fused.data()[i];
        CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
    }

    // absent rows route by bias alone: identical gate rows across the batch
    const Tensor& gates_b = out1.gates[1];
    const Tensor bias_route = gate_weights(banks[1], Tensor::zeros({1, d}));
    for (int k = 0; k < 3; ++k) {
        CHECK(gates_b.at(1, k) == bias_route.at(0, k));
    }

    // full presence differs from one-absent (absence embedding is active)
    const std::vector<std::uint8_t> all_present(static_cast<std::size_t>(rows) * m_count, 1);
    const ModalityBankOut out3 = modality_bank_forward(banks, fp, {za, zb}, all_present);
    bool differs = false;
    for (int c = 0; c < d; ++c) differs = differs || out3.fused.at(1, c) != out1.fused.at(1, c);
    CHECK(differs);
}

TEST_CASE("end-to-end bank gradient at B=2, M=2, K=2, d=4") {
    Rng rng(13);
    const int rows = 2, d = 4;
    std::vector<ModalityBankParams> banks;
    banks.push_back(ModalityBankParams::init("a", d, 2, rng));
    banks.push_back(ModalityBankParams::init("b", d, 2, rng));
    FusionParams fp = FusionParams::init(d, 2, rng);
    const Tensor za = random_rows(rows, d, rng);
    const Tensor zb = random_rows(rows, d, rng);
    const std::vector<std::uint8_t> presence = {1, 1, 0, 1};

    std::vector<NamedParam> params;
    for (int m = 0; m < 2; ++m) {
        const auto sub = banks[static_cast<std::size_t>(m)].named_params("bank" + std::to_string(m));
        params.insert(params.end(), sub.begin(), sub.end());
    }
    const auto fsub = fp.named_params("fusion");
    params.insert(params.end(), fsub.begin(), fsub.end());

    const auto loss = [&] {
        const ModalityBankOut out = modality_bank_forward(banks, fp, {za, zb}, presence);
        return sum_all(mul(out.fused, out.fused));
    };
    const auto report = finite_diff_check(loss, params, 1e-5);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("uniform routing override produces constant gates") {
    Rng rng(14);
    const int rows = 3, d = 4;
    std::vector<ModalityBankParams> banks;
    banks.push_back(ModalityBankParams::init("a", d, 4, rng));
    FusionParams fp = FusionParams::init(d, 1, rng);
    const Tensor za = random_rows(rows, d, rng);
    const std::vector<std::uint8_t> presence(rows, 1);
    const ModalityBankOut out = modality_bank_forward(banks, fp, {za}, presence, /*uniform_routing=*/true);
    for (int r = 0; r < rows; ++r) {
        for (int k = 0; k < 4; ++k) CHECK(out.gates[0].at(r, k) == 0.25);
    }
}
