#include "himoe/encoder.hpp"

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

}  // namespace

EncoderParams EncoderParams::init(const std::string& modality, int in_dim, int hidden, int out_dim,
                                  Rng& rng) {
    if (in_dim < 1 || hidden < 1 || out_dim < 1) {
        throw ConfigError("encoder " + modality + ": dimensions must be positive");
    }
    EncoderParams p;
    p.modality = modality;
    p.in_dim = in_dim;
    p.hidden = hidden;
    p.out_dim = out_dim;
    p.w1 = init_weight(hidden, in_dim, rng);
    p.b1 = Tensor::zeros({hidden}, true);
    p.w2 = init_weight(out_dim, hidden, rng);
    p.b2 = Tensor::zeros({out_dim}, true);
    return p;
}

std::vector<NamedParam> EncoderParams::named_params(const std::string& prefix) const {
    return {{prefix + ".w1", w1}, {prefix + ".b1", b1}, {prefix + ".w2", w2}, {prefix + ".b2", b2}};
}

Tensor encode(const EncoderParams& params, const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != params.in_dim) {
        throw DimensionError("encode[" + params.modality + "]: window length " + shape_str(x.shape()) +
                             " does not match expected in_dim " + std::to_string(params.in_dim));
    }
    return affine(tanh_op(affine(x, params.w1, params.b1)), params.w2, params.b2);
}

}  // namespace himoe
