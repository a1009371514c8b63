#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "himoe/rng.hpp"
#include "himoe/tensor.hpp"

namespace himoe {

// Dimension-specific prediction heads and the masked emotion losses.

enum class HeadMode { kRegression, kBinary };

HeadMode head_mode_from_string(const std::string& s);
std::string to_string(HeadMode mode);

// One independent affine head d -> 1 per emotion dimension.
struct HeadParams {
    std::vector<std::string> dim_names;
    std::vector<HeadMode> modes;
    std::vector<Tensor> weight;  // per dim: 1 x d
    std::vector<Tensor> bias;    // per dim: 1

    static HeadParams init(const std::vector<std::string>& dims, const std::vector<HeadMode>& modes,
                           int feature_dim, Rng& rng);
    int dims() const { return static_cast<int>(dim_names.size()); }
    std::vector<NamedParam> named_params(const std::string& prefix) const;
};

struct LossConfig {
    double lambda = 0.1;  // weight of the alignment term
};

struct HeadOutput {
    // Regression dims: value in (1,9). Binary dims: probability in (0,1).
    std::vector<Tensor> prediction;  // per dim [B,1]
    std::vector<Tensor> logit;       // per dim [B,1] (raw affine output)
};

HeadOutput predict(const HeadParams& heads, const Tensor& features);

// Mean over unmasked (row, dim) cells: squared error against the 1..9 label
// for regression dims, binary cross-entropy against label > 5 for binary
// dims. An all-masked batch yields a constant 0 with no gradient.
Tensor emo_loss(const HeadParams& heads, const HeadOutput& out, const std::vector<double>& labels,
                const std::vector<std::uint8_t>& label_mask);

// total = emo + lambda * alignment; lambda = 0 disables alignment exactly.
Tensor total_loss(const Tensor& emo, const Tensor& alignment, const LossConfig& cfg);

// Threshold used to binarize 1..9 labels for binary heads and ACC/F1.
inline constexpr double kBinaryLabelThreshold = 5.0;

}  // namespace himoe
