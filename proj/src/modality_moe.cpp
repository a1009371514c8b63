#include "himoe/modality_moe.hpp"

#include <cmath>

#include "himoe/errors.hpp"

namespace himoe {

namespace {

Tensor init_weight(int out, int in, Rng& rng) {
    std::vector<double> data(static_cast<std::size_t>(out) * in);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from_data({out, in}, std::move(data), true);
}

Tensor init_vector(int n, Rng& rng, double scale) {
    std::vector<double> data(static_cast<std::size_t>(n));
    for (double& v : data) v = rng.uniform(-scale, scale);
    return Tensor::from_data({n}, std::move(data), true);
}

}  // namespace

ExpertParams ExpertParams::init(int dim, Rng& rng) {
    ExpertParams p;
    p.w1 = init_weight(dim, dim, rng);
    p.b1 = Tensor::zeros({dim}, true);
    p.w2 = init_weight(dim, dim, rng);
    p.b2 = Tensor::zeros({dim}, true);
    return p;
}

Tensor ExpertParams::forward(const Tensor& x) const {
    return affine(tanh_op(affine(x, w1, b1)), w2, b2);
}

std::vector<NamedParam> ExpertParams::named_params(const std::string& prefix) const {
    return {{prefix + ".w1", w1}, {prefix + ".b1", b1}, {prefix + ".w2", w2}, {prefix + ".b2", b2}};
}

ModalityBankParams ModalityBankParams::init(const std::string& modality, int dim, int experts, Rng& rng) {
    if (experts < 1) throw ConfigError("modality bank " + modality + ": K must be >= 1");
    ModalityBankParams p;
    p.modality = modality;
    p.dim = dim;
    p.experts = experts;
    p.gate_w = init_weight(experts, dim, rng);
    p.gate_b = Tensor::zeros({experts}, true);
    p.expert_nets.reserve(static_cast<std::size_t>(experts));
    for (int k = 0; k < experts; ++k) p.expert_nets.push_back(ExpertParams::init(dim, rng));
    return p;
}

std::vector<NamedParam> ModalityBankParams::named_params(const std::string& prefix) const {
    std::vector<NamedParam> out = {{prefix + ".gate_w", gate_w}, {prefix + ".gate_b", gate_b}};
    for (std::size_t k = 0; k < expert_nets.size(); ++k) {
        const auto sub = expert_nets[k].named_params(prefix + ".expert" + std::to_string(k));
        out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
}

FusionParams FusionParams::init(int dim, int modalities, Rng& rng) {
    FusionParams p;
    p.dim = dim;
    p.query = init_vector(dim, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
    p.present_embed.reserve(static_cast<std::size_t>(modalities));
    p.absent_embed.reserve(static_cast<std::size_t>(modalities));
    for (int m = 0; m < modalities; ++m) {
        p.present_embed.push_back(init_vector(dim, rng, 0.1));
        p.absent_embed.push_back(init_vector(dim, rng, 0.1));
    }
    return p;
}

std::vector<NamedParam> FusionParams::named_params(const std::string& prefix) const {
    std::vector<NamedParam> out = {{prefix + ".query", query}};
    for (std::size_t m = 0; m < present_embed.size(); ++m) {
        out.push_back({prefix + ".present" + std::to_string(m), present_embed[m]});
        out.push_back({prefix + ".absent" + std::to_string(m), absent_embed[m]});
    }
    return out;
}

Tensor gate_weights(const ModalityBankParams& params, const Tensor& x) {
    return softmax(affine(x, params.gate_w, params.gate_b));
}

Tensor expert_mix(const ModalityBankParams& params, const Tensor& x, const Tensor& alpha) {
    if (alpha.rank() != 2 || alpha.dim(1) != params.experts) {
        throw DimensionError("expert_mix: alpha " + shape_str(alpha.shape()) + " vs K=" +
                             std::to_string(params.experts));
    }
    Tensor out;
    for (int k = 0; k < params.experts; ++k) {
        const Tensor weighted =
            mul_colvec(params.expert_nets[static_cast<std::size_t>(k)].forward(x), col(alpha, k));
        out = k == 0 ? weighted : add(out, weighted);
    }
    return out;
}

FusionOut fuse(const std::vector<Tensor>& modality_outputs, const std::vector<std::uint8_t>& presence,
               const FusionParams& params) {
    const int m_count = static_cast<int>(modality_outputs.size());
    if (m_count < 1) throw ContractError("fuse: needs at least one modality");
    const int rows = modality_outputs[0].dim(0);
    if (static_cast<int>(presence.size()) != rows * m_count) {
        throw DimensionError("fuse: presence size " + std::to_string(presence.size()) + " vs " +
                             std::to_string(rows * m_count));
    }
    for (int r = 0; r < rows; ++r) {
        bool any = false;
        for (int m = 0; m < m_count; ++m) any = any || presence[static_cast<std::size_t>(r) * m_count + m];
        if (!any) throw ContractError("fuse: row " + std::to_string(r) + " has no present modality");
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.dim));
    const Tensor query_row = reshape(params.query, {1, params.dim});

    std::vector<Tensor> tokens(static_cast<std::size_t>(m_count));
    std::vector<Tensor> scores(static_cast<std::size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
        std::vector<double> present_coeff(static_cast<std::size_t>(rows), 0.0);
        std::vector<double> absent_coeff(static_cast<std::size_t>(rows), 0.0);
        for (int r = 0; r < rows; ++r) {
            const bool p = presence[static_cast<std::size_t>(r) * m_count + m] != 0;
            present_coeff[static_cast<std::size_t>(r)] = p ? 1.0 : 0.0;
            absent_coeff[static_cast<std::size_t>(r)] = p ? 0.0 : 1.0;
        }
        Tensor u = add_scaled_rowvec(modality_outputs[static_cast<std::size_t>(m)],
                                     params.present_embed[static_cast<std::size_t>(m)], present_coeff);
        u = add_scaled_rowvec(u, params.absent_embed[static_cast<std::size_t>(m)], absent_coeff);
        tokens[static_cast<std::size_t>(m)] = u;
        scores[static_cast<std::size_t>(m)] = scale(matmul_nt(u, query_row), inv_sqrt_d);
    }

    FusionOut out;
    out.weights = softmax(hstack(scores));
    for (int m = 0; m < m_count; ++m) {
        const Tensor contribution = mul_colvec(tokens[static_cast<std::size_t>(m)], col(out.weights, m));
        out.fused = m == 0 ? contribution : add(out.fused, contribution);
    }
    return out;
}

ModalityBankOut modality_bank_forward(const std::vector<ModalityBankParams>& banks,
                                      const FusionParams& fusion_params,
                                      const std::vector<Tensor>& encoded,
                                      const std::vector<std::uint8_t>& presence, bool uniform_routing) {
    const int m_count = static_cast<int>(banks.size());
    if (static_cast<int>(encoded.size()) != m_count) {
        throw DimensionError("modality_bank_forward: " + std::to_string(encoded.size()) +
                             " feature blocks for " + std::to_string(m_count) + " banks");
    }
    const int rows = encoded.empty() ? 0 : encoded[0].dim(0);

    ModalityBankOut out;
    out.gates.reserve(static_cast<std::size_t>(m_count));
    std::vector<Tensor> mixed(static_cast<std::size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
        std::vector<std::uint8_t> keep(static_cast<std::size_t>(rows), 0);
        for (int r = 0; r < rows; ++r) keep[static_cast<std::size_t>(r)] = presence[static_cast<std::size_t>(r) * m_count + m];
        // Zero-vector protocol: absent rows enter the bank as exact zeros.
        const Tensor x = mask_rows(encoded[static_cast<std::size_t>(m)], keep);
        const ModalityBankParams& bank = banks[static_cast<std::size_t>(m)];
        const Tensor alpha = uniform_routing
                                 ? Tensor::full({rows, bank.experts}, 1.0 / static_cast<double>(bank.experts))
                                 : gate_weights(bank, x);
        out.gates.push_back(alpha);
        mixed[static_cast<std::size_t>(m)] = expert_mix(bank, x, alpha);
    }
    FusionOut fused = fuse(mixed, presence, fusion_params);
    out.fused = fused.fused;
    out.fusion_weights = fused.weights;
    return out;
}

}  // namespace himoe
