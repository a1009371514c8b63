#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "himoe/rng.hpp"
#include "himoe/tensor.hpp"

namespace himoe {

// First hierarchy layer: per-modality expert banks with soft gating, the
// zero-vector protocol for absent modalities, and attention-based fusion of
// the modality outputs into one embedding.

// Small expert network: affine -> tanh -> affine, d -> d.
struct ExpertParams {
    Tensor w1, b1, w2, b2;

    static ExpertParams init(int dim, Rng& rng);
    Tensor forward(const Tensor& x) const;
    std::vector<NamedParam> named_params(const std::string& prefix) const;
};

struct ModalityBankParams {
    std::string modality;
    int dim = 0;
    int experts = 0;  // K
    Tensor gate_w;    // K x d
    Tensor gate_b;    // K
    std::vector<ExpertParams> expert_nets;

    static ModalityBankParams init(const std::string& modality, int dim, int experts, Rng& rng);
    std::vector<NamedParam> named_params(const std::string& prefix) const;
};

// Single-query scaled dot-product fusion with learned presence/absence
// embeddings per modality so the aggregator can tell genuine zeros from
// absent inputs.
struct FusionParams {
    int dim = 0;
    Tensor query;                  // d
    std::vector<Tensor> present_embed;  // per modality, d
    std::vector<Tensor> absent_embed;   // per modality, d

    static FusionParams init(int dim, int modalities, Rng& rng);
    std::vector<NamedParam> named_params(const std::string& prefix) const;
};

// alpha = softmax(W_g x + b_g); rows with x == 0 reduce exactly to
// softmax(b_g). x: [B, d] -> [B, K].
Tensor gate_weights(const ModalityBankParams& params, const Tensor& x);

// z = sum_k alpha[:,k] * E_k(x); dense soft mixture, every expert evaluated.
Tensor expert_mix(const ModalityBankParams& params, const Tensor& x, const Tensor& alpha);

// Tokens u_m = z_m + presence/absence embedding; scores q.u_m/sqrt(d);
// softmax over modalities; weighted sum. presence is row-major [B, M].
struct FusionOut {
    Tensor fused;    // [B, d]
    Tensor weights;  // [B, M]
};
FusionOut fuse(const std::vector<Tensor>& modality_outputs, const std::vector<std::uint8_t>& presence,
               const FusionParams& params);

struct ModalityBankOut {
    Tensor fused;                 // [B, d]
    Tensor fusion_weights;        // [B, M]
    std::vector<Tensor> gates;    // per modality [B, K]
};

// Composite forward over all modality banks. encoded[m] must already be in
// the shared feature space; rows of absent modalities are forced to exact
// zero before gating (the zero-vector protocol). uniform_routing replaces
// the learned gate with constant 1/K weights.
ModalityBankOut modality_bank_forward(const std::vector<ModalityBankParams>& banks,
                                      const FusionParams& fusion_params,
                                      const std::vector<Tensor>& encoded,
                                      const std::vector<std::uint8_t>& presence,
                                      bool uniform_routing = false);

}  // namespace himoe
