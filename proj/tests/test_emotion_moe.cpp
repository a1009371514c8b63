#include <cmath>
#include <vector>

#include "doctest.h"
#include "himoe/emotion_moe.hpp"
#include "himoe/errors.hpp"

using namespace himoe;

namespace {

Tensor random_rows(int rows, int dim, Rng& rng) {
    std::vector<double> data(static_cast<std::size_t>(rows) * dim);
    for (double& v : data) v = rng.uniform(-1, 1);
    return Tensor::from_data({rows, dim}, std::move(data));
}

void copy_expert(const ExpertParams& src, ExpertParams& dst) {
    const auto cp = [](const Tensor& s, Tensor d) {
        auto out = d.mutable_data();
        std::copy(s.data().begin(), s.data().end(), out.begin());
    };
    cp(src.w1, dst.w1);
    cp(src.b1, dst.b1);
    cp(src.w2, dst.w2);
    cp(src.b2, dst.b2);
}

}  // namespace

TEST_CASE("identical experts route uniformly") {
    Rng rng(1);
    EmotionBankParams bank = EmotionBankParams::init(4, 3, rng);
    for (int l = 1; l < 3; ++l) copy_expert(bank.expert_nets[0], bank.expert_nets[static_cast<std::size_t>(l)]);
    const EmotionRoute route = da_route(bank, random_rows(5, 4, rng));
    for (int r = 0; r < 5; ++r) {
        for (int l = 0; l < 3; ++l) {
            CHECK(route.beta.at(r, l) == doctest::Approx(1.0 / 3).epsilon(1e-12));
        }
    }
}

TEST_CASE("single expert takes all the weight and the mixture is its output") {
    Rng rng(2);
    EmotionBankParams bank = EmotionBankParams::init(4, 1, rng);
    const Tensor z = random_rows(3, 4, rng);
    const EmotionRoute route = da_route(bank, z);
    for (int r = 0; r < 3; ++r) CHECK(route.beta.at(r, 0) == 1.0);
    const Tensor e = emotion_mix(bank, route);
    const Tensor direct = bank.expert_nets[0].forward(z);
    for (std::size_t i = 0; i < e.numel(); ++i) CHECK(e.data()[i] == direct.data()[i]);
}

TEST_CASE("one-hot beta selects a single expert output") {
    Rng rng(3);
    EmotionBankParams bank = EmotionBankParams::init(4, 3, rng);
    const Tensor z = random_rows(2, 4, rng);
    EmotionRoute route = da_route(bank, z);
    route.beta = Tensor::from_data({2, 3}, {0, 0, 1, 0, 0, 1});
    const Tensor e = emotion_mix(bank, route);
    const Tensor direct = bank.expert_nets[2].forward(z);
    for (std::size_t i = 0; i < e.numel(); ++i) CHECK(e.data()[i] == direct.data()[i]);
}

TEST_CASE("beta sums to one and stays strictly inside (0,1)") {
    Rng rng(4);
    EmotionBankParams bank = EmotionBankParams::init(6, 5, rng);
    const EmotionRoute route = da_route(bank, random_rows(200, 6, rng));
    for (int r = 0; r < 200; ++r) {
        double acc = 0.0;
        for (int l = 0; l < 5; ++l) {
            const double b = route.beta.at(r, l);
            CHECK(b > 0.0);
            CHECK(b < 1.0);
            acc += b;
        }
        CHECK(std::abs(acc - 1.0) <= 1e-12);
    }
}

TEST_CASE("router and expert gradients match finite differences") {
    Rng rng(5);
    EmotionBankParams bank = EmotionBankParams::init(4, 2, rng);
    const Tensor z = random_rows(3, 4, rng);
    const auto loss = [&] {
        const EmotionRoute route = da_route(bank, z);
        return sum_all(mul(emotion_mix(bank, route), emotion_mix(bank, route)));
    };
    const auto report = finite_diff_check(loss, bank.named_params("emo"), 1e-5);
    CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("expert permutation permutes beta and preserves the mixture") {
    Rng rng(6);
    const int d = 5, experts = 4;
    EmotionBankParams bank = EmotionBankParams::init(d, experts, rng);
    const Tensor z = random_rows(4, d, rng);
    const EmotionRoute route = da_route(bank, z);
    const Tensor mixed = emotion_mix(bank, route);

    const std::vector<int> perm = {1, 3, 0, 2};
    EmotionBankParams permuted = EmotionBankParams::init(d, experts, rng);
    {
        auto w = permuted.sim_w.mutable_data();
        std::copy(bank.sim_w.data().begin(), bank.sim_w.data().end(), w.begin());
    }
    for (int l = 0; l < experts; ++l) {
        copy_expert(bank.expert_nets[static_cast<std::size_t>(perm[static_cast<std::size_t>(l)])],
                    permuted.expert_nets[static_cast<std::size_t>(l)]);
    }
    const EmotionRoute route_p = da_route(permuted, z);
    const Tensor mixed_p = emotion_mix(permuted, route_p);

    for (int r = 0; r < 4; ++r) {
        for (int l = 0; l < experts; ++l) {
            CHECK(route_p.beta.at(r, l) ==
                  doctest::Approx(route.beta.at(r, perm[static_cast<std::size_t>(l)])).epsilon(1e-12));
        }
    }
    for (std::size_t i = 0; i < mixed.numel(); ++i) {
        CHECK(mixed.data()[i] == doctest::Approx(mixed_p.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("expert count must be positive") {
    Rng rng(7);
    CHECK_THROWS_AS(EmotionBankParams::init(4, 0, rng), ConfigError);
}
