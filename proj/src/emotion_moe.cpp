#include "himoe/emotion_moe.hpp"

#include <cmath>

#include "himoe/errors.hpp"

namespace himoe {

EmotionBankParams EmotionBankParams::init(int dim, int experts, Rng& rng) {
    if (experts < 1) throw ConfigError("emotion bank: L must be >= 1");
    EmotionBankParams p;
    p.dim = dim;
    p.experts = experts;
    std::vector<double> w(static_cast<std::size_t>(dim) * dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& v : w) v = rng.uniform(-bound, bound);
    p.sim_w = Tensor::from_data({dim, dim}, std::move(w), true);
    p.expert_nets.reserve(static_cast<std::size_t>(experts));
    for (int l = 0; l < experts; ++l) p.expert_nets.push_back(ExpertParams::init(dim, rng));
    return p;
}

std::vector<NamedParam> EmotionBankParams::named_params(const std::string& prefix) const {
    std::vector<NamedParam> out = {{prefix + ".sim_w", sim_w}};
    for (std::size_t l = 0; l < expert_nets.size(); ++l) {
        const auto sub = expert_nets[l].named_params(prefix + ".expert" + std::to_string(l));
        out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
}

EmotionRoute da_route(const EmotionBankParams& params, const Tensor& z) {
    if (z.rank() != 2 || z.dim(1) != params.dim) {
        throw DimensionError("da_route: input " + shape_str(z.shape()) + " vs d=" + std::to_string(params.dim));
    }
    EmotionRoute route;
    route.outputs.reserve(static_cast<std::size_t>(params.experts));
    const Tensor projected = matmul_nt(z, params.sim_w);  // rows are W_phi z
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.dim));
    std::vector<Tensor> scores(static_cast<std::size_t>(params.experts));
    for (int l = 0; l < params.experts; ++l) {
        const Tensor f = params.expert_nets[static_cast<std::size_t>(l)].forward(z);
        route.outputs.push_back(f);
        scores[static_cast<std::size_t>(l)] = scale(sum_rows(mul(projected, f)), inv_sqrt_d);
    }
    route.beta = softmax(hstack(scores));
    return route;
}

Tensor emotion_mix(const EmotionBankParams& params, const EmotionRoute& route) {
    if (static_cast<int>(route.outputs.size()) != params.experts) {
        throw ContractError("emotion_mix: route holds " + std::to_string(route.outputs.size()) +
                            " outputs for L=" + std::to_string(params.experts));
    }
    Tensor out;
    for (int l = 0; l < params.experts; ++l) {
        const Tensor weighted = mul_colvec(route.outputs[static_cast<std::size_t>(l)], col(route.beta, l));
        out = l == 0 ? weighted : add(out, weighted);
    }
    return out;
}

}  // namespace himoe
