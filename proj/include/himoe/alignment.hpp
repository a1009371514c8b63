#pragma once

#include <cstdint>
#include <vector>

#include "himoe/tensor.hpp"

namespace himoe {

// Contrastive cross-modal alignment: similarity matrix over the stacked
// two-modality batch and the NT-Xent loss that pulls same-sample
// representations together across modalities.

struct AlignmentConfig {
    double tau = 0.1;  // temperature
    bool enabled = true;
};

// S[p,q] = (z_p . z_q) / tau over Z = [Zi; Zj], rows l2-normalized inside;
// diagonal entries carry a -inf surrogate so they drop out of every softmax
// denominator.
struct SimilarityMatrix {
    Tensor s;           // [2B, 2B]
    int batch = 0;      // B
    double tau = 0.0;
};

inline constexpr double kDiagMaskValue = -1e30;

SimilarityMatrix similarity_matrix(const Tensor& zi, const Tensor& zj, double tau);

// -(1/2B) sum_i log( exp(S[i,y_i]) / sum_{j != i} exp(S[i,j]) ), with the
// positive index y_i = (i + B) mod 2B. Requires B >= 2.
Tensor ntxent_loss(const SimilarityMatrix& sim);

// Mean NT-Xent over all unordered modality pairs, each restricted to rows
// where both modalities are present; a pair with fewer than 2 jointly
// present rows contributes 0. The denominator is always M(M-1)/2.
Tensor pairwise_alignment_loss(const std::vector<Tensor>& features,
                               const std::vector<std::uint8_t>& presence, int modalities,
                               const AlignmentConfig& cfg);

}  // namespace himoe
