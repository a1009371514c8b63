#include "himoe/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "himoe/errors.hpp"

namespace himoe {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0') throw ConfigError(key + ": bad number '" + value + "'");
    return v;
}

int to_int(const std::string& key, const std::string& value) {
    const double v = to_double(key, value);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) throw ConfigError(key + ": expected integer, got '" + value + "'");
    return i;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0') throw ConfigError(key + ": bad unsigned integer '" + value + "'");
    return static_cast<std::uint64_t>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(key + ": expected boolean, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : value) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (const std::string& item : split_list(value)) out.push_back(to_double(key, item));
    return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const std::string& item : split_list(value)) out.push_back(to_int(key, item));
    return out;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

void apply_override(std::map<std::string, std::string>& kv, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set wants key=value, got '" + assignment + "'");
    kv[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    cfg.raw = kv;
    std::vector<std::string> unknown;

    // Per-modality synth lists are resolved after scalar keys.
    std::vector<std::string> synth_names;
    std::vector<int> synth_d_raw;
    std::vector<double> synth_lags_s;
    std::vector<double> synth_noise;
    std::vector<int> synth_coverage;
    int synth_modalities = -1;

    for (const auto& [key, value] : kv) {
        if (key == "seed") cfg.seed = to_u64(key, value);
        else if (key == "epochs") cfg.epochs = to_int(key, value);
        else if (key == "batch_size") cfg.batch_size = to_int(key, value);
        else if (key == "optim.lr") cfg.learning_rate = to_double(key, value);
        else if (key == "optim.beta1") cfg.adam_beta1 = to_double(key, value);
        else if (key == "optim.beta2") cfg.adam_beta2 = to_double(key, value);
        else if (key == "optim.eps") cfg.adam_eps = to_double(key, value);
        else if (key == "optim.lr_min") cfg.lr_min = to_double(key, value);
        else if (key == "optim.cosine_horizon") cfg.cosine_horizon = to_int(key, value);
        else if (key == "early_stop.patience") cfg.early_stop_patience = to_int(key, value);
        else if (key == "model") cfg.model = value;
        else if (key == "dataset.path") cfg.dataset_path = value;
        else if (key == "output.dir") cfg.output_dir = value;
        else if (key == "threads") cfg.threads = to_int(key, value);
        else if (key == "missing.rate") cfg.missing_rate = to_double(key, value);
        else if (key == "missing.rates") cfg.missing_rates = to_double_list(key, value);
        else if (key == "sweep.seeds") cfg.sweep_seeds = to_int(key, value);
        else if (key == "sweep.expert_counts") cfg.expert_counts = to_int_list(key, value);
        else if (key == "encoder.hidden") cfg.encoder_hidden = to_int(key, value);
        else if (key == "encoder.out_dim") cfg.feature_dim = to_int(key, value);
        else if (key == "moe.modality_experts") cfg.modality_experts = to_int(key, value);
        else if (key == "moe.emotion_experts") cfg.emotion_experts = to_int(key, value);
        else if (key == "moe.use_emotion_bank") cfg.use_emotion_bank = to_bool(key, value);
        else if (key == "moe.uniform_routing") cfg.uniform_routing = to_bool(key, value);
        else if (key == "align.tau") cfg.align_tau = to_double(key, value);
        else if (key == "align.enabled") cfg.align_enabled = to_bool(key, value);
        else if (key == "loss.lambda") cfg.loss_lambda = to_double(key, value);
        else if (key == "heads.mode") cfg.default_head_mode = head_mode_from_string(value);
        else if (key.rfind("heads.mode.", 0) == 0) {
            cfg.head_mode_overrides[key.substr(11)] = head_mode_from_string(value);
        }
        else if (key == "synth.modalities") synth_modalities = to_int(key, value);
        else if (key == "synth.names") synth_names = split_list(value);
        else if (key == "synth.d_raw") synth_d_raw = to_int_list(key, value);
        else if (key == "synth.lags_s") synth_lags_s = to_double_list(key, value);
        else if (key == "synth.noise_std") synth_noise = to_double_list(key, value);
        else if (key == "synth.coverage") synth_coverage = to_int_list(key, value);
        else if (key == "synth.trials.train") cfg.synth.trials_train = to_int(key, value);
        else if (key == "synth.trials.val") cfg.synth.trials_val = to_int(key, value);
        else if (key == "synth.trials.test") cfg.synth.trials_test = to_int(key, value);
        else if (key == "synth.trial_len_s") cfg.synth.trial_len_s = to_double(key, value);
        else if (key == "synth.sample_rate") cfg.synth.sample_rate = to_double(key, value);
        else if (key == "synth.window_s") cfg.synth.window_s = to_double(key, value);
        else if (key == "synth.step_s") cfg.synth.step_s = to_double(key, value);
        else if (key == "synth.emo_dims") cfg.synth.emo_dims = to_int(key, value);
        else if (key == "synth.dim_names") cfg.synth.dim_names = split_list(value);
        else if (key == "synth.min_sinusoids") cfg.synth.min_sinusoids = to_int(key, value);
        else if (key == "synth.max_sinusoids") cfg.synth.max_sinusoids = to_int(key, value);
        else if (key == "synth.freq_lo_hz") cfg.synth.freq_lo_hz = to_double(key, value);
        else if (key == "synth.freq_hi_hz") cfg.synth.freq_hi_hz = to_double(key, value);
        else if (key == "synth.smoothness_bound") cfg.synth.smoothness_bound = to_double(key, value);
        else if (key == "synth.missing_rate") cfg.synth.missing_rate = to_double(key, value);
        else if (key == "synth.label_missing_rate") cfg.synth.label_missing_rate = to_double(key, value);
        else if (key == "synth.map") {
            if (value == "random") cfg.synth.map_kind = MixingMap::kRandom;
            else if (value == "identity") cfg.synth.map_kind = MixingMap::kIdentity;
            else throw ConfigError("synth.map: want random|identity, got '" + value + "'");
        }
        else if (key == "synth.map_gain") cfg.synth.map_gain = to_double(key, value);
        else if (key == "synth.coverage_dims") cfg.synth.coverage_dims = to_int(key, value);
        else unknown.push_back(key);
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const std::string& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }

    // Assemble the synth modality list from whatever was provided.
    if (synth_modalities > 0 || !synth_names.empty() || !synth_d_raw.empty() || !synth_lags_s.empty() ||
        !synth_noise.empty() || !synth_coverage.empty()) {
        const std::size_t count = synth_modalities > 0 ? static_cast<std::size_t>(synth_modalities)
                                 : !synth_names.empty() ? synth_names.size()
                                                        : cfg.synth.modalities.size();
        std::vector<ModalitySpec> specs;
        for (std::size_t m = 0; m < count; ++m) {
            ModalitySpec spec = m < cfg.synth.modalities.size() ? cfg.synth.modalities[m] : ModalitySpec{};
            if (m < synth_names.size()) spec.name = synth_names[m];
            if (spec.name.empty() || m >= cfg.synth.modalities.size()) {
                if (m >= synth_names.size()) spec.name = "mod" + std::to_string(m);
            }
            if (!synth_d_raw.empty()) spec.d_raw = synth_d_raw[std::min(m, synth_d_raw.size() - 1)];
            if (!synth_lags_s.empty()) {
                const double lag_s = synth_lags_s[std::min(m, synth_lags_s.size() - 1)];
                spec.lag_steps = static_cast<int>(lag_s * cfg.synth.sample_rate + 0.5);
            }
            if (!synth_noise.empty()) spec.noise_std = synth_noise[std::min(m, synth_noise.size() - 1)];
            if (!synth_coverage.empty()) {
                spec.coverage_dims = synth_coverage[std::min(m, synth_coverage.size() - 1)];
            }
            specs.push_back(spec);
        }
        cfg.synth.modalities = std::move(specs);
    }

    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.learning_rate <= 0.0) throw ConfigError("optim.lr must be positive");
    if (cfg.align_tau <= 0.0) throw ConfigError("align.tau must be positive");
    if (cfg.loss_lambda < 0.0) throw ConfigError("loss.lambda must be >= 0");
    if (cfg.missing_rate < 0.0 || cfg.missing_rate > 1.0) throw ConfigError("missing.rate must be in [0,1]");
    if (cfg.sweep_seeds < 1) throw ConfigError("sweep.seeds must be >= 1");
    if (cfg.model != "full" && cfg.model != "baseline") {
        throw ConfigError("model must be full|baseline, got '" + cfg.model + "'");
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path, const std::vector<std::string>& overrides) {
    std::map<std::string, std::string> kv;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        std::ostringstream os;
        os << in.rdbuf();
        kv = parse_config_text(os.str());
    }
    for (const std::string& o : overrides) apply_override(kv, o);
    return from_map(kv);
}

std::vector<HeadMode> RunConfig::head_modes_for(const std::vector<std::string>& dim_names) const {
    for (const auto& [dim, mode] : head_mode_overrides) {
        if (std::find(dim_names.begin(), dim_names.end(), dim) == dim_names.end()) {
            throw ConfigError("heads.mode." + dim + ": dataset has no dimension '" + dim + "'");
        }
    }
    std::vector<HeadMode> modes;
    modes.reserve(dim_names.size());
    for (const std::string& dim : dim_names) {
        const auto it = head_mode_overrides.find(dim);
        modes.push_back(it == head_mode_overrides.end() ? default_head_mode : it->second);
    }
    return modes;
}

std::string RunConfig::run_manifest_json() const {
    nlohmann::ordered_json j;
    j["format"] = "himoe-run-manifest-v1";
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& [key, value] : raw) config[key] = value;  // verbatim echo
    j["config"] = config;
    nlohmann::ordered_json effective;
    effective["seed"] = seed;
    effective["epochs"] = epochs;
    effective["batch_size"] = batch_size;
    effective["learning_rate"] = learning_rate;
    effective["adam_beta1"] = adam_beta1;
    effective["adam_beta2"] = adam_beta2;
    effective["adam_eps"] = adam_eps;
    effective["lr_min"] = lr_min;
    effective["cosine_horizon"] = cosine_horizon == 0 ? epochs : cosine_horizon;
    effective["early_stop_patience"] = early_stop_patience;
    effective["model"] = model;
    effective["dataset_path"] = dataset_path;
    effective["output_dir"] = output_dir;
    effective["missing_rate"] = missing_rate;
    effective["encoder_hidden"] = encoder_hidden;
    effective["feature_dim"] = feature_dim;
    effective["modality_experts"] = modality_experts;
    effective["emotion_experts"] = emotion_experts;
    effective["use_emotion_bank"] = use_emotion_bank;
    effective["uniform_routing"] = uniform_routing;
    effective["align_tau"] = align_tau;
    effective["align_enabled"] = align_enabled;
    effective["loss_lambda"] = loss_lambda;
    effective["default_head_mode"] = to_string(default_head_mode);
    j["effective"] = effective;
    return j.dump(2) + "\n";
}

}  // namespace himoe
