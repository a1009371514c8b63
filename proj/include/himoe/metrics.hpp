#pragma once

#include <span>
#include <string>
#include <vector>

namespace himoe {

// Evaluation metrics for continuous regression (Lin's concordance correlation,
// Pearson correlation, mean absolute error) and binary classification
// (accuracy, positive-class F1). All moments are population (1/n) moments.

struct PccResult {
    double value = 0.0;
    bool degenerate = false;  // a constant input sequence; value forced to 0
};

double ccc(std::span<const double> pred, std::span<const double> truth);
PccResult pcc(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);

struct AccF1 {
    double acc = 0.0;
    double f1 = 0.0;
};

// probs thresholded at 0.5 against 0/1 truth labels.
AccF1 acc_f1(std::span<const double> probs, std::span<const double> truth);

struct DimensionMetrics {
    std::string dimension;
    double ccc = 0.0;
    double pcc = 0.0;
    double mae = 0.0;
    bool has_binary = false;
    double acc = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    std::string split;
    std::uint64_t seed = 0;
    double missing_rate = 0.0;
    std::vector<DimensionMetrics> per_dimension;

    double mean_ccc() const;
    double mean_pcc() const;
    double mean_mae() const;
};

// Serializes one or more reports as metrics.csv rows
// (split,dimension,ccc,pcc,mae,acc,f1,seed,missing_rate), with one aggregate
// "mean" row per report. Float formatting is the project-wide 9-significant-
// digit form, so identical reports serialize to identical bytes.
std::string metrics_csv(const std::vector<MetricsReport>& reports);

}  // namespace himoe
