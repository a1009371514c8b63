#pragma once

#include <string>
#include <vector>

#include "himoe/rng.hpp"
#include "himoe/tensor.hpp"

namespace himoe {

// Modality-specific encoder: two affine layers with tanh between, projecting
// a flattened window into the shared d-dimensional feature space. Parameters
// are never shared across modalities.
struct EncoderParams {
    std::string modality;
    int in_dim = 0;
    int hidden = 0;
    int out_dim = 0;
    Tensor w1, b1;  // hidden x in, hidden
    Tensor w2, b2;  // out x hidden, out

    static EncoderParams init(const std::string& modality, int in_dim, int hidden, int out_dim, Rng& rng);
    std::vector<NamedParam> named_params(const std::string& prefix) const;
};

// x: [B, in_dim] -> [B, out_dim]. Throws DimensionError on a window-length
// mismatch.
Tensor encode(const EncoderParams& params, const Tensor& x);

}  // namespace himoe
