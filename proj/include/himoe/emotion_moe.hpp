#pragma once

#include <string>
#include <vector>

#include "himoe/modality_moe.hpp"
#include "himoe/rng.hpp"
#include "himoe/tensor.hpp"

namespace himoe {

// Second hierarchy layer: emotion expert bank routed by similarity between
// the fused embedding and each expert's own response (differential attention
// routing). Experts are evaluated once; their outputs feed both the router
// and the mixture.

struct EmotionBankParams {
    int dim = 0;
    int experts = 0;  // L
    Tensor sim_w;     // d x d projection used by the similarity phi
    std::vector<ExpertParams> expert_nets;

    static EmotionBankParams init(int dim, int experts, Rng& rng);
    std::vector<NamedParam> named_params(const std::string& prefix) const;
};

struct EmotionRoute {
    Tensor beta;                   // [B, L]
    std::vector<Tensor> outputs;   // per expert [B, d], reused by the mixture
};

// beta[l] = softmax_l( (W_phi z) . F_l(z) / sqrt(d) ).
EmotionRoute da_route(const EmotionBankParams& params, const Tensor& z);

// e = sum_l beta[:,l] * F_l(z).
Tensor emotion_mix(const EmotionBankParams& params, const EmotionRoute& route);

}  // namespace himoe
