#include "himoe/heads.hpp"

#include <cmath>

#include "himoe/errors.hpp"

namespace himoe {

HeadMode head_mode_from_string(const std::string& s) {
    if (s == "regression") return HeadMode::kRegression;
    if (s == "binary") return HeadMode::kBinary;
    throw ConfigError("unknown head mode '" + s + "' (want regression|binary)");
}

std::string to_string(HeadMode mode) {
    return mode == HeadMode::kRegression ? "regression" : "binary";
}

HeadParams HeadParams::init(const std::vector<std::string>& dims, const std::vector<HeadMode>& modes,
                            int feature_dim, Rng& rng) {
    if (dims.size() != modes.size()) throw ConfigError("head init: dims/modes length mismatch");
    HeadParams p;
    p.dim_names = dims;
    p.modes = modes;
    const double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (std::size_t d = 0; d < dims.size(); ++d) {
        std::vector<double> w(static_cast<std::size_t>(feature_dim));
        for (double& v : w) v = rng.uniform(-bound, bound);
        p.weight.push_back(Tensor::from_data({1, feature_dim}, std::move(w), true));
        p.bias.push_back(Tensor::zeros({1}, true));
    }
    return p;
}

std::vector<NamedParam> HeadParams::named_params(const std::string& prefix) const {
    std::vector<NamedParam> out;
    for (std::size_t d = 0; d < dim_names.size(); ++d) {
        out.push_back({prefix + "." + dim_names[d] + ".w", weight[d]});
        out.push_back({prefix + "." + dim_names[d] + ".b", bias[d]});
    }
    return out;
}

HeadOutput predict(const HeadParams& heads, const Tensor& features) {
    HeadOutput out;
    out.prediction.reserve(heads.weight.size());
    out.logit.reserve(heads.weight.size());
    for (std::size_t d = 0; d < heads.weight.size(); ++d) {
        const Tensor logit = affine(features, heads.weight[d], heads.bias[d]);
        out.logit.push_back(logit);
        if (heads.modes[d] == HeadMode::kRegression) {
            // 1 + 8*sigmoid keeps the output on the open (1,9) Likert range.
            out.prediction.push_back(add_scalar(scale(sigmoid(logit), 8.0), 1.0));
        } else {
            out.prediction.push_back(sigmoid(logit));
        }
    }
    return out;
}

Tensor emo_loss(const HeadParams& heads, const HeadOutput& out, const std::vector<double>& labels,
                const std::vector<std::uint8_t>& label_mask) {
    const int dims = heads.dims();
    if (dims == 0) throw ContractError("emo_loss: no heads");
    const int rows = out.prediction[0].dim(0);
    if (static_cast<int>(labels.size()) != rows * dims || labels.size() != label_mask.size()) {
        throw DimensionError("emo_loss: labels/mask size mismatch (" + std::to_string(labels.size()) +
                             " labels, " + std::to_string(label_mask.size()) + " mask, " +
                             std::to_string(rows * dims) + " cells)");
    }

    std::size_t unmasked = 0;
    for (const auto v : label_mask) unmasked += v ? 1 : 0;
    if (unmasked == 0) return Tensor::scalar(0.0);  // constant: zero loss, zero gradient

    Tensor total;
    bool first = true;
    for (int d = 0; d < dims; ++d) {
        std::vector<double> target(static_cast<std::size_t>(rows));
        std::vector<double> mask(static_cast<std::size_t>(rows));
        for (int r = 0; r < rows; ++r) {
            const double label = labels[static_cast<std::size_t>(r) * dims + d];
            target[static_cast<std::size_t>(r)] = heads.modes[static_cast<std::size_t>(d)] == HeadMode::kBinary
                                                      ? (label > kBinaryLabelThreshold ? 1.0 : 0.0)
                                                      : label;
            mask[static_cast<std::size_t>(r)] = label_mask[static_cast<std::size_t>(r) * dims + d] ? 1.0 : 0.0;
        }
        const Tensor target_t = Tensor::from_data({rows, 1}, std::move(target));
        const Tensor mask_t = Tensor::from_data({rows, 1}, std::move(mask));

        Tensor cell;
        if (heads.modes[static_cast<std::size_t>(d)] == HeadMode::kRegression) {
            const Tensor diff = sub(out.prediction[static_cast<std::size_t>(d)], target_t);
            cell = mul(diff, diff);
        } else {
            const Tensor p = out.prediction[static_cast<std::size_t>(d)];
            const Tensor one_minus_t = sub(Tensor::full({rows, 1}, 1.0), target_t);
            const Tensor one_minus_p = sub(Tensor::full({rows, 1}, 1.0), p);
            const Tensor pos = mul(target_t, log_op(add_scalar(p, kLogEps)));
            const Tensor neg = mul(one_minus_t, log_op(add_scalar(one_minus_p, kLogEps)));
            cell = scale(add(pos, neg), -1.0);
        }
        const Tensor masked = mul(cell, mask_t);
        total = first ? sum_all(masked) : add(total, sum_all(masked));
        first = false;
    }
    return scale(total, 1.0 / static_cast<double>(unmasked));
}

Tensor total_loss(const Tensor& emo, const Tensor& alignment, const LossConfig& cfg) {
    if (cfg.lambda < 0.0) throw ConfigError("loss lambda must be >= 0");
    if (cfg.lambda == 0.0) return emo;  // exact: no alignment term in the graph
    return add(emo, scale(alignment, cfg.lambda));
}

}  // namespace himoe
