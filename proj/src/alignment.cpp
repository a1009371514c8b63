#include "himoe/alignment.hpp"

#include <string>

#include "himoe/errors.hpp"

namespace himoe {

SimilarityMatrix similarity_matrix(const Tensor& zi, const Tensor& zj, double tau) {
    if (tau <= 0.0) throw ConfigError("similarity temperature must be positive, got " + std::to_string(tau));
    if (zi.rank() != 2 || zj.rank() != 2 || zi.dim(0) != zj.dim(0) || zi.dim(1) != zj.dim(1)) {
        throw DimensionError("similarity_matrix: blocks must share shape, got " + shape_str(zi.shape()) +
                             " vs " + shape_str(zj.shape()));
    }
    const int b = zi.dim(0);
    const Tensor z = concat_rows(l2_normalize(zi), l2_normalize(zj));
    Tensor s = scale(matmul_nt(z, z), 1.0 / tau);

    // Mask the diagonal with a -inf surrogate (constant, so no gradient to it).
    std::vector<double> diag(static_cast<std::size_t>(2 * b) * static_cast<std::size_t>(2 * b), 0.0);
    for (int i = 0; i < 2 * b; ++i)
        diag[static_cast<std::size_t>(i) * (2 * b) + static_cast<std::size_t>(i)] = kDiagMaskValue;
    s = add(s, Tensor::from_data({2 * b, 2 * b}, std::move(diag)));

    SimilarityMatrix out;
    out.s = s;
    out.batch = b;
    out.tau = tau;
    return out;
}

Tensor ntxent_loss(const SimilarityMatrix& sim) {
    const int b = sim.batch;
    if (b < 2) throw ContractError("ntxent_loss: batch must be >= 2, got " + std::to_string(b));
    const int n = 2 * b;

    // Positive selector: one-hot rows at y_i = (i + B) mod 2B.
    std::vector<double> pos_sel(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        const int y = (i + b) % n;
        pos_sel[static_cast<std::size_t>(i) * n + y] = 1.0;
    }
    const Tensor positives = sum_rows(mul(sim.s, Tensor::from_data({n, n}, std::move(pos_sel))));
    const Tensor denominators = logsumexp_rows(sim.s);  // diagonal underflows to zero weight
    return scale(sum_all(sub(denominators, positives)), 1.0 / static_cast<double>(n));
}

Tensor pairwise_alignment_loss(const std::vector<Tensor>& features,
                               const std::vector<std::uint8_t>& presence, int modalities,
                               const AlignmentConfig& cfg) {
    if (modalities < 2) throw ContractError("pairwise_alignment_loss: needs M >= 2");
    if (static_cast<int>(features.size()) != modalities) {
        throw DimensionError("pairwise_alignment_loss: " + std::to_string(features.size()) +
                             " feature blocks for M=" + std::to_string(modalities));
    }
    const int rows = features[0].dim(0);
    Tensor total = Tensor::scalar(0.0);
    int pairs = 0;
    for (int i = 0; i < modalities; ++i) {
        for (int j = i + 1; j < modalities; ++j) {
            ++pairs;
            std::vector<int> joint;
            for (int r = 0; r < rows; ++r) {
                const std::size_t base = static_cast<std::size_t>(r) * modalities;
                if (presence[base + static_cast<std::size_t>(i)] && presence[base + static_cast<std::size_t>(j)]) {
                    joint.push_back(r);
                }
            }
            if (joint.size() < 2) continue;  // degenerate pair contributes 0
            const Tensor zi = gather_rows(features[static_cast<std::size_t>(i)], joint);
            const Tensor zj = gather_rows(features[static_cast<std::size_t>(j)], joint);
            total = add(total, ntxent_loss(similarity_matrix(zi, zj, cfg.tau)));
        }
    }
    return scale(total, 1.0 / static_cast<double>(pairs));
}

}  // namespace himoe
