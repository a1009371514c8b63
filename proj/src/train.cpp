#include "himoe/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "himoe/errors.hpp"
#include "himoe/format.hpp"

namespace himoe {

AdamOptimizer::AdamOptimizer(std::vector<NamedParam> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].tensor.numel(), 0.0);
        v_[i].assign(params_[i].tensor.numel(), 0.0);
    }
}

void AdamOptimizer::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor t = params_[i].tensor;
        if (!t.has_grad()) continue;  // parameter unreachable from this loss
        const auto g = t.grad();
        auto values = t.mutable_data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < values.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            values[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& p : params_) {
        Tensor t = p.tensor;
        t.zero_grad();
    }
}

double cosine_lr(double lr, double lr_min, int epoch, int horizon) {
    if (horizon <= 0) return lr;
    const double frac = std::min(1.0, static_cast<double>(epoch) / static_cast<double>(horizon));
    constexpr double pi = 3.14159265358979323846;
    return lr_min + 0.5 * (lr - lr_min) * (1.0 + std::cos(pi * frac));
}

TrainSettings TrainSettings::from(const RunConfig& cfg) {
    TrainSettings s;
    s.epochs = cfg.epochs;
    s.batch_size = cfg.batch_size;
    s.learning_rate = cfg.learning_rate;
    s.beta1 = cfg.adam_beta1;
    s.beta2 = cfg.adam_beta2;
    s.eps = cfg.adam_eps;
    s.lr_min = cfg.lr_min;
    s.cosine_horizon = cfg.cosine_horizon;
    s.patience = cfg.early_stop_patience;
    s.missing_rate = cfg.missing_rate;
    s.lambda = cfg.align_enabled ? cfg.loss_lambda : 0.0;
    s.tau = cfg.align_tau;
    s.align_enabled = cfg.align_enabled;
    s.seed = cfg.seed;
    return s;
}

Tensor batch_loss(const Model& model, const BatchView& batch, const TrainSettings& settings,
                  double* emo_out, double* align_out) {
    const ForwardOut out = model.forward(batch);
    const Tensor emo = emo_loss(model.heads(), out.heads, batch.labels, batch.label_mask);
    if (emo_out) *emo_out = emo.item();

    const bool use_align = settings.align_enabled && settings.lambda > 0.0 && model.kind() == "full" &&
                           model.config().modalities() >= 2;
    if (!use_align) {
        if (align_out) *align_out = 0.0;
        return emo;
    }
    AlignmentConfig align_cfg;
    align_cfg.tau = settings.tau;
    const Tensor align =
        pairwise_alignment_loss(out.encoded, batch.presence, model.config().modalities(), align_cfg);
    if (align_out) *align_out = align.item();
    LossConfig loss_cfg;
    loss_cfg.lambda = settings.lambda;
    return total_loss(emo, align, loss_cfg);
}

std::vector<std::uint8_t> eval_presence_mask(int rows, int modalities, double rate, std::uint64_t seed,
                                             const std::string& split_name) {
    Rng rng(derive_seed(seed, "eval_mask." + split_name + "." + format_g9(rate)));
    return sample_presence(rows, modalities, rate, rng);
}

namespace {

std::vector<std::vector<double>> snapshot_params(const std::vector<NamedParam>& params) {
    std::vector<std::vector<double>> snap;
    snap.reserve(params.size());
    for (const NamedParam& p : params) snap.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    return snap;
}

void restore_params(const std::vector<NamedParam>& params, const std::vector<std::vector<double>>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor t = params[i].tensor;
        auto dst = t.mutable_data();
        std::copy(snap[i].begin(), snap[i].end(), dst.begin());
    }
}

}  // namespace

EvalOutput evaluate_split(const Model& model, const SplitData& split, const std::string& split_name,
                          const TrainSettings& settings) {
    const int m_count = split.modality_count();
    const int dims = model.heads().dims();
    const auto mask =
        eval_presence_mask(split.rows, m_count, settings.missing_rate, settings.seed, split_name);

    EvalOutput out;
    out.preds.assign(static_cast<std::size_t>(dims), {});
    out.truths.assign(static_cast<std::size_t>(dims), {});

    for (int start = 0; start < split.rows; start += settings.batch_size) {
        const int end = std::min(split.rows, start + settings.batch_size);
        std::vector<int> rows(static_cast<std::size_t>(end - start));
        for (int i = start; i < end; ++i) rows[static_cast<std::size_t>(i - start)] = i;
        std::vector<std::uint8_t> override_mask(static_cast<std::size_t>(end - start) * m_count);
        for (int i = start; i < end; ++i) {
            for (int m = 0; m < m_count; ++m) {
                override_mask[static_cast<std::size_t>(i - start) * m_count + m] =
                    mask[static_cast<std::size_t>(i) * m_count + m];
            }
        }
        const BatchView batch = make_batch(split, rows, &override_mask);
        const ForwardOut fwd = model.forward(batch);
        for (int d = 0; d < dims; ++d) {
            const auto pred = fwd.heads.prediction[static_cast<std::size_t>(d)].data();
            for (int r = 0; r < batch.rows; ++r) {
                if (!batch.label_mask[static_cast<std::size_t>(r) * dims + d]) continue;
                const double label = batch.labels[static_cast<std::size_t>(r) * dims + d];
                out.preds[static_cast<std::size_t>(d)].push_back(pred[static_cast<std::size_t>(r)]);
                out.truths[static_cast<std::size_t>(d)].push_back(
                    model.heads().modes[static_cast<std::size_t>(d)] == HeadMode::kBinary
                        ? (label > kBinaryLabelThreshold ? 1.0 : 0.0)
                        : label);
            }
        }
    }

    out.report.split = split_name;
    out.report.seed = settings.seed;
    out.report.missing_rate = settings.missing_rate;
    for (int d = 0; d < dims; ++d) {
        DimensionMetrics dm;
        dm.dimension = model.heads().dim_names[static_cast<std::size_t>(d)];
        const auto& p = out.preds[static_cast<std::size_t>(d)];
        const auto& t = out.truths[static_cast<std::size_t>(d)];
        if (p.size() >= 2) {
            dm.ccc = ccc(p, t);
            dm.pcc = pcc(p, t).value;
            dm.mae = mae(p, t);
            if (model.heads().modes[static_cast<std::size_t>(d)] == HeadMode::kBinary) {
                dm.has_binary = true;
                const AccF1 af = acc_f1(p, t);
                dm.acc = af.acc;
                dm.f1 = af.f1;
            }
        }
        out.report.per_dimension.push_back(dm);
    }
    return out;
}

TrainResult train_model(Model& model, const DatasetBundle& data, const TrainSettings& settings) {
    const SplitData& train = data.train;
    const int m_count = train.modality_count();
    const int horizon = settings.cosine_horizon > 0 ? settings.cosine_horizon : settings.epochs;

    AdamOptimizer opt(model.named_params(), settings.beta1, settings.beta2, settings.eps);
    const auto params = model.named_params();

    TrainResult result;
    std::vector<std::vector<double>> best_snapshot;
    int stale_epochs = 0;

    for (int epoch = 0; epoch < settings.epochs; ++epoch) {
        const double lr = cosine_lr(settings.learning_rate, settings.lr_min, epoch, horizon);

        // Fresh presence mask every epoch: masking applies in training, too.
        std::vector<std::uint8_t> epoch_mask;
        if (settings.missing_rate > 0.0) {
            Rng mask_rng(derive_seed(settings.seed, "train_mask", static_cast<std::uint64_t>(epoch)));
            epoch_mask = sample_presence(train.rows, m_count, settings.missing_rate, mask_rng);
        }

        Rng shuffle_rng(derive_seed(settings.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        const std::vector<int> perm = shuffle_rng.permutation(train.rows);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        int batch_index = 0;
        for (int start = 0; start < train.rows; start += settings.batch_size, ++batch_index) {
            const int end = std::min(train.rows, start + settings.batch_size);
            std::vector<int> rows(static_cast<std::size_t>(end - start));
            std::vector<std::uint8_t> override_mask;
            if (!epoch_mask.empty()) override_mask.resize(rows.size() * static_cast<std::size_t>(m_count));
            for (int i = start; i < end; ++i) {
                const int src = perm[static_cast<std::size_t>(i)];
                rows[static_cast<std::size_t>(i - start)] = src;
                if (!epoch_mask.empty()) {
                    for (int m = 0; m < m_count; ++m) {
                        override_mask[static_cast<std::size_t>(i - start) * m_count + m] =
                            epoch_mask[static_cast<std::size_t>(src) * m_count + m];
                    }
                }
            }
            const BatchView batch = make_batch(train, rows, epoch_mask.empty() ? nullptr : &override_mask);

            double emo_value = 0.0, align_value = 0.0;
            const Tensor loss = batch_loss(model, batch, settings, &emo_value, &align_value);
            const double loss_value = loss.item();
            if (!std::isfinite(loss_value)) {
                throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index) + " (emo=" + format_g9(emo_value) +
                                 ", align=" + format_g9(align_value) + ")");
            }
            opt.zero_grad();
            backward(loss);
            opt.step(lr);
            epoch_loss += loss_value * static_cast<double>(batch.rows);
            seen += static_cast<std::size_t>(batch.rows);
        }

        // Validation under the same missing rate, fixed mask.
        const EvalOutput val = evaluate_split(model, data.val, "val", settings);
        double val_loss = 0.0;
        {
            std::vector<int> rows(static_cast<std::size_t>(data.val.rows));
            for (int i = 0; i < data.val.rows; ++i) rows[static_cast<std::size_t>(i)] = i;
            const auto mask = eval_presence_mask(data.val.rows, m_count, settings.missing_rate,
                                                 settings.seed, "val");
            const BatchView batch = make_batch(data.val, rows, &mask);
            TrainSettings emo_only = settings;  // logged validation loss is the emotion term
            emo_only.lambda = 0.0;
            val_loss = batch_loss(model, batch, emo_only, nullptr, nullptr).item();
        }
        const double val_ccc = val.report.mean_ccc();

        EpochLog log;
        log.epoch = epoch;
        log.lr = lr;
        log.train_loss = seen > 0 ? epoch_loss / static_cast<double>(seen) : 0.0;
        log.val_loss = val_loss;
        log.val_ccc = val_ccc;
        result.log.push_back(log);
        result.epochs_run = epoch + 1;
        if (settings.verbose) {
            std::cout << "epoch " << epoch << " lr " << format_g9(lr) << " train_loss "
                      << format_g9(log.train_loss) << " val_loss " << format_g9(val_loss) << " val_ccc "
                      << format_g9(val_ccc) << "\n";
        }

        if (val_ccc > result.best_val_ccc) {
            result.best_val_ccc = val_ccc;
            result.best_epoch = epoch;
            best_snapshot = snapshot_params(params);
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (settings.patience > 0 && stale_epochs >= settings.patience) {
                result.early_stopped = true;
                break;
            }
        }
    }

    if (!best_snapshot.empty()) restore_params(params, best_snapshot);
    return result;
}

}  // namespace himoe
