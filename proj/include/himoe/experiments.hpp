#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "himoe/config.hpp"
#include "himoe/dataset.hpp"
#include "himoe/model.hpp"
#include "himoe/train.hpp"

namespace himoe {

// ---- single training cell ------------------------------------------------------

struct CellSpec {
    std::string model_kind = "full";  // full | baseline
    std::uint64_t seed = 1;
    double missing_rate = 0.0;
    int emotion_experts = -1;      // -1 -> config value
    bool use_emotion_bank = true;  // ablation switches
    bool disable_alignment = false;
    bool uniform_routing = false;
};

struct CellResult {
    CellSpec spec;
    TrainResult train;
    MetricsReport val;
    MetricsReport test;
};

ModelConfig model_config_for(const RunConfig& cfg, const DatasetManifest& manifest);

// Trains one cell from scratch on the shared bundle and evaluates val/test
// under the cell's missing rate. Deterministic given (cfg, spec).
CellResult run_cell(const RunConfig& cfg, const DatasetBundle& data, const CellSpec& spec,
                    std::unique_ptr<Model>* model_out = nullptr);

// Runs independent cells on a small thread pool (cells share only the
// read-only bundle); results keep the input order.
std::vector<CellResult> run_cells(const RunConfig& cfg, const DatasetBundle& data,
                                  const std::vector<CellSpec>& specs, int threads);

// ---- experiment drivers -----------------------------------------------------------

struct SweepMissingResult {
    std::vector<CellResult> cells;
    std::string csv;  // degradation_curve.csv content

    double mean_ccc(const std::string& model, double rate) const;
    double std_ccc(const std::string& model, double rate) const;
};
SweepMissingResult sweep_missing(const RunConfig& cfg, const DatasetBundle& data);

struct SweepExpertsResult {
    std::vector<CellResult> cells;
    std::string csv;  // expert_sweep.csv content

    double mean_ccc(int experts) const;
    double std_ccc(int experts) const;
    double pooled_std() const;
};
SweepExpertsResult sweep_experts(const RunConfig& cfg, const DatasetBundle& data);

struct AblationResult {
    std::vector<std::string> variants;  // full, no_emotion_bank, no_alignment, uniform_routing
    std::vector<CellResult> cells;
    std::string csv;  // ablation.csv content

    double mean_ccc(const std::string& variant) const;
    const CellResult& cell(const std::string& variant, std::uint64_t seed) const;
};
AblationResult run_ablations(const RunConfig& cfg, const DatasetBundle& data);

// Average gate and fusion weights per presence pattern, the Fig.-style
// routing report. Pattern strings are binary, one char per modality, '1' for
// present. Gate rows use expert_index 0..K-1; the fusion weight row uses
// expert_index -1. Patterns that never occur are omitted.
std::string report_routing_csv(const Model& model, const SplitData& split, double missing_rate,
                               std::uint64_t seed);

// ---- gradient integrity -------------------------------------------------------------

struct GradcheckEntry {
    std::string name;
    FiniteDiffReport report;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    double worst = 0.0;
    std::string worst_name;

    bool pass(double tol) const { return worst < tol; }
    std::string text() const;
};

// Finite-difference check over every op family and the full composite loss
// at toy dimensions (M=2, K=2, L=2, d=4, B=2).
GradcheckReport gradcheck_all();

}  // namespace himoe
