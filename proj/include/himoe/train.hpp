#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "himoe/config.hpp"
#include "himoe/dataset.hpp"
#include "himoe/metrics.hpp"
#include "himoe/model.hpp"
#include "himoe/tensor.hpp"

namespace himoe {

// Adam with bias correction over a fixed parameter list.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<NamedParam> params, double beta1, double beta2, double eps);

    void step(double lr);
    void zero_grad();

private:
    std::vector<NamedParam> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_;
    long long t_ = 0;
};

// Cosine annealing from lr to lr_min over horizon epochs (0-based epoch).
double cosine_lr(double lr, double lr_min, int epoch, int horizon);

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_ccc = 0.0;
};

struct TrainResult {
    int epochs_run = 0;
    int best_epoch = -1;
    double best_val_ccc = -2.0;
    bool early_stopped = false;
    std::vector<EpochLog> log;
};

struct TrainSettings {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double lr_min = 1e-5;
    int cosine_horizon = 0;  // 0 -> epochs
    int patience = 10;
    double missing_rate = 0.0;  // applied to train (fresh mask per epoch) and eval (fixed mask)
    double lambda = 0.1;
    double tau = 0.1;
    bool align_enabled = true;
    std::uint64_t seed = 1;
    bool verbose = false;

    static TrainSettings from(const RunConfig& cfg);
};

// Deterministic single-threaded training with masking in both training and
// evaluation, early stopping on validation mean CCC and best-checkpoint
// restore. Throws TrainError with epoch/batch diagnostics on non-finite loss.
TrainResult train_model(Model& model, const DatasetBundle& data, const TrainSettings& settings);

// Builds the loss for one batch; exposed for gradient checking.
Tensor batch_loss(const Model& model, const BatchView& batch, const TrainSettings& settings,
                  double* emo_out = nullptr, double* align_out = nullptr);

struct EvalOutput {
    MetricsReport report;
    // Per dimension: predictions and truths over unmasked cells. Binary dims
    // hold probabilities and 0/1 targets.
    std::vector<std::vector<double>> preds;
    std::vector<std::vector<double>> truths;
};

// Evaluates with the deterministic per-(seed, split, rate) presence mask.
EvalOutput evaluate_split(const Model& model, const SplitData& split, const std::string& split_name,
                          const TrainSettings& settings);

// The fixed evaluation mask used by evaluate_split.
std::vector<std::uint8_t> eval_presence_mask(int rows, int modalities, double rate,
                                             std::uint64_t seed, const std::string& split_name);

}  // namespace himoe
