#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "himoe/dataset.hpp"
#include "himoe/heads.hpp"

namespace himoe {

// Flat key=value configuration. Files hold one `key = value` per line with
// '#' comments; --set overrides replace entries before parsing. Unknown keys
// are rejected, and every raw value is echoed verbatim into
// run_manifest.json.

struct RunConfig {
    std::uint64_t seed = 1;
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double lr_min = 1e-5;
    int cosine_horizon = 0;  // 0 -> epochs
    int early_stop_patience = 10;

    std::string model = "full";  // full | baseline
    std::string dataset_path;
    std::string output_dir = ".";
    int threads = 0;  // sweep cell parallelism; 0 -> hardware

    double missing_rate = 0.0;
    std::vector<double> missing_rates = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40};
    int sweep_seeds = 5;
    std::vector<int> expert_counts = {1, 2, 4, 6, 8, 12};

    int encoder_hidden = 64;
    int feature_dim = 32;      // encoder.out_dim (d)
    int modality_experts = 4;  // K
    int emotion_experts = 6;   // L
    bool use_emotion_bank = true;
    bool uniform_routing = false;

    double align_tau = 0.1;
    bool align_enabled = true;
    double loss_lambda = 0.1;

    HeadMode default_head_mode = HeadMode::kRegression;
    std::map<std::string, HeadMode> head_mode_overrides;  // per dimension name

    // Synthetic generator settings consumed by the synth command.
    GeneratorConfig synth = GeneratorConfig::default_desk_scale();

    // Raw key -> value text, exactly as given, echoed into run_manifest.json.
    std::map<std::string, std::string> raw;

    static RunConfig from_map(const std::map<std::string, std::string>& kv);
    static RunConfig load(const std::string& path, const std::vector<std::string>& overrides);

    std::vector<HeadMode> head_modes_for(const std::vector<std::string>& dim_names) const;
    std::string run_manifest_json() const;
};

std::map<std::string, std::string> parse_config_text(const std::string& text);
void apply_override(std::map<std::string, std::string>& kv, const std::string& assignment);

}  // namespace himoe
