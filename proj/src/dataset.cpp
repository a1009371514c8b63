#include "himoe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "himoe/errors.hpp"
#include "himoe/format.hpp"

namespace himoe {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out << text;
    if (!out) throw FormatError("write failed for " + path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& file) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw FormatError("bad numeric value '" + s + "' in " + file);
    return v;
}

}  // namespace

// ---- config -----------------------------------------------------------------

GeneratorConfig GeneratorConfig::default_desk_scale() {
    GeneratorConfig cfg;
    cfg.modalities = {
        {"eeg", 6, 0, 0.02},
        {"pps", 6, 2, 0.08},
        {"face", 6, 4, 0.15},
        {"audio", 6, 8, 0.25},
    };
    return cfg;
}

void GeneratorConfig::validate() const {
    if (modalities.size() < 2) throw ConfigError("generator needs at least 2 modalities");
    for (const ModalitySpec& m : modalities) {
        if (m.d_raw < 1) throw ConfigError("modality " + m.name + ": d_raw must be >= 1");
        if (m.lag_steps < 0) throw ConfigError("modality " + m.name + ": lag_steps must be >= 0");
        if (m.noise_std < 0.0) throw ConfigError("modality " + m.name + ": noise_std must be >= 0");
        if (m.name.empty()) throw ConfigError("modality with empty name");
    }
    if (emo_dims < 1) throw ConfigError("emo_dims must be >= 1");
    if (static_cast<int>(dim_names.size()) != emo_dims) {
        throw ConfigError("dim_names count " + std::to_string(dim_names.size()) + " != emo_dims " +
                          std::to_string(emo_dims));
    }
    if (trials_train < 1 || trials_val < 1 || trials_test < 1) throw ConfigError("trial counts must be >= 1");
    if (sample_rate <= 0.0) throw ConfigError("sample_rate must be positive");
    if (step_s <= 0.0) throw ConfigError("step_s must be positive");
    if (window_len() > t_raw()) {
        throw ConfigError("window (" + std::to_string(window_len()) + " samples) longer than trial (" +
                          std::to_string(t_raw()) + " samples)");
    }
    if (window_len() < 1) throw ConfigError("window must span at least 1 sample");
    if (min_sinusoids < 1 || max_sinusoids < min_sinusoids) throw ConfigError("bad sinusoid count range");
    if (freq_lo_hz <= 0.0 || freq_hi_hz < freq_lo_hz) throw ConfigError("bad frequency range");
    if (map_gain <= 0.0) throw ConfigError("map_gain must be positive");
    if (coverage_dims < 0 || coverage_dims > emo_dims) {
        throw ConfigError("coverage_dims must be in [0, emo_dims]");
    }
    if (missing_rate < 0.0 || missing_rate > 1.0) throw ConfigError("missing_rate must be in [0,1]");
    if (label_missing_rate < 0.0 || label_missing_rate > 1.0)
        throw ConfigError("label_missing_rate must be in [0,1]");
}

// ---- latent ------------------------------------------------------------------

double LatentTrajectory::max_step_delta() const {
    double worst = 0.0;
    for (int d = 0; d < dims; ++d) {
        for (int t = 0; t + 1 < t_raw; ++t) {
            worst = std::max(worst, std::abs(at(t + 1, d) - at(t, d)));
        }
    }
    return worst;
}

LatentTrajectory generate_latent(const GeneratorConfig& cfg, Rng& rng) {
    LatentTrajectory latent;
    latent.t_raw = cfg.t_raw();
    latent.dims = cfg.emo_dims;
    latent.sample_rate = cfg.sample_rate;
    latent.values.resize(static_cast<std::size_t>(latent.t_raw) * latent.dims);

    std::vector<double> series(static_cast<std::size_t>(latent.t_raw));
    for (int d = 0; d < latent.dims; ++d) {
        const int n_sin = rng.uniform_int(cfg.min_sinusoids, cfg.max_sinusoids);
        std::vector<double> amp(static_cast<std::size_t>(n_sin)), freq(static_cast<std::size_t>(n_sin)),
            phase(static_cast<std::size_t>(n_sin));
        for (int s = 0; s < n_sin; ++s) {
            amp[static_cast<std::size_t>(s)] = rng.uniform(0.5, 1.0);
            freq[static_cast<std::size_t>(s)] = rng.uniform(cfg.freq_lo_hz, cfg.freq_hi_hz);
            phase[static_cast<std::size_t>(s)] = rng.uniform(0.0, kTwoPi);
        }
        // Halve all frequencies until the rescaled trajectory honors the
        // declared smoothness bound; deterministic and always terminates.
        for (int attempt = 0; attempt < 64; ++attempt) {
            for (int t = 0; t < latent.t_raw; ++t) {
                const double time_s = static_cast<double>(t) / cfg.sample_rate;
                double v = 0.0;
                for (int s = 0; s < n_sin; ++s) {
                    v += amp[static_cast<std::size_t>(s)] *
                         std::sin(kTwoPi * freq[static_cast<std::size_t>(s)] * time_s +
                                  phase[static_cast<std::size_t>(s)]);
                }
                series[static_cast<std::size_t>(t)] = v;
            }
            const auto [mn_it, mx_it] = std::minmax_element(series.begin(), series.end());
            const double mn = *mn_it, mx = *mx_it;
            const double span = mx - mn;
            const double gain = span > 1e-9 ? 8.0 / span : 0.0;
            double worst = 0.0;
            for (int t = 0; t + 1 < latent.t_raw; ++t) {
                worst = std::max(worst, gain * std::abs(series[static_cast<std::size_t>(t + 1)] -
                                                        series[static_cast<std::size_t>(t)]));
            }
            if (span > 1e-9 && worst <= cfg.smoothness_bound) {
                for (int t = 0; t < latent.t_raw; ++t) {
                    latent.values[static_cast<std::size_t>(t) * latent.dims + d] =
                        1.0 + gain * (series[static_cast<std::size_t>(t)] - mn);
                }
                break;
            }
            if (span <= 1e-9) {
                // Degenerate cancellation: replace phases and retry.
                for (int s = 0; s < n_sin; ++s) phase[static_cast<std::size_t>(s)] = rng.uniform(0.0, kTwoPi);
            } else {
                for (int s = 0; s < n_sin; ++s) freq[static_cast<std::size_t>(s)] *= 0.5;
            }
            if (attempt == 63) throw ConfigError("latent generation failed to satisfy smoothness bound");
        }
    }
    return latent;
}

// ---- modality synthesis ----------------------------------------------------------

MixingParams make_mixing(const GeneratorConfig& cfg, const ModalitySpec& spec, int modality_index,
                         Rng& rng) {
    MixingParams map;
    map.d_raw = spec.d_raw;
    map.emo_dims = cfg.emo_dims;
    map.weight.assign(static_cast<std::size_t>(spec.d_raw) * cfg.emo_dims, 0.0);
    map.offset.assign(static_cast<std::size_t>(spec.d_raw), 0.0);
    if (cfg.map_kind == MixingMap::kIdentity) {
        for (int i = 0; i < std::min(spec.d_raw, cfg.emo_dims); ++i) {
            map.weight[static_cast<std::size_t>(i) * cfg.emo_dims + i] = 1.0;
        }
        return map;
    }
    // Partial coverage: modality m observes emotion dimensions
    // {(m + j) mod D : j < coverage}. Per-modality overrides let one stream
    // act as a dominant full-coverage carrier while the others stay partial.
    int coverage = spec.coverage_dims >= 0 ? spec.coverage_dims : cfg.coverage_dims;
    if (coverage <= 0 || coverage > cfg.emo_dims) coverage = cfg.emo_dims;
    std::vector<std::uint8_t> observed(static_cast<std::size_t>(cfg.emo_dims), 0);
    for (int j = 0; j < coverage; ++j) {
        observed[static_cast<std::size_t>((modality_index + j) % cfg.emo_dims)] = 1;
    }
    const double scale = cfg.map_gain / std::sqrt(static_cast<double>(coverage));
    for (int j = 0; j < spec.d_raw; ++j) {
        for (int d = 0; d < cfg.emo_dims; ++d) {
            const double w = rng.normal(0.0, scale);  // draw regardless, keeps streams aligned
            if (observed[static_cast<std::size_t>(d)]) {
                map.weight[static_cast<std::size_t>(j) * cfg.emo_dims + d] = w;
            }
        }
    }
    for (double& c : map.offset) c = rng.uniform(-0.2, 0.2);
    return map;
}

ModalityStream synthesize_modality(const LatentTrajectory& latent, const ModalitySpec& spec,
                                   const MixingParams& map, Rng& rng) {
    if (map.d_raw != spec.d_raw || map.emo_dims != latent.dims) {
        throw ConfigError("mixing map does not match modality " + spec.name);
    }
    ModalityStream out;
    out.name = spec.name;
    out.t_raw = latent.t_raw;
    out.d_raw = spec.d_raw;
    out.lag_steps = spec.lag_steps;
    out.noise_std = spec.noise_std;
    out.raw.resize(static_cast<std::size_t>(latent.t_raw) * spec.d_raw);
    for (int t = 0; t < latent.t_raw; ++t) {
        const int src = std::max(0, t - spec.lag_steps);  // pre-trial rows repeat the first value
        for (int j = 0; j < spec.d_raw; ++j) {
            double acc = map.offset[static_cast<std::size_t>(j)];
            for (int d = 0; d < latent.dims; ++d) {
                const double norm = (latent.at(src, d) - 5.0) / 4.0;  // [1,9] -> [-1,1]
                acc += map.weight[static_cast<std::size_t>(j) * latent.dims + d] * norm;
            }
            double v = std::tanh(acc);
            if (spec.noise_std > 0.0) v += rng.normal(0.0, spec.noise_std);
            out.raw[static_cast<std::size_t>(t) * spec.d_raw + j] = v;
        }
    }
    return out;
}

std::vector<double> invert_identity_stream(const ModalityStream& stream, int emo_dims) {
    if (stream.d_raw < emo_dims) throw ContractError("invert_identity_stream: d_raw < emo_dims");
    std::vector<double> latent(static_cast<std::size_t>(stream.t_raw) * emo_dims);
    for (int t = 0; t < stream.t_raw; ++t) {
        for (int d = 0; d < emo_dims; ++d) {
            const double v = stream.raw[static_cast<std::size_t>(t) * stream.d_raw + d];
            latent[static_cast<std::size_t>(t) * emo_dims + d] = 5.0 + 4.0 * std::atanh(v);
        }
    }
    return latent;
}

// ---- windowing / presence ---------------------------------------------------------

std::vector<double> slide_windows(const std::vector<double>& raw, int t_raw, int d_raw,
                                  double window_s, double step_s, double sample_rate,
                                  int* out_windows) {
    if (step_s <= 0.0) throw ConfigError("slide_windows: step_s must be positive");
    if (sample_rate <= 0.0) throw ConfigError("slide_windows: sample_rate must be positive");
    const int win = static_cast<int>(window_s * sample_rate + 0.5);
    const int step = static_cast<int>(step_s * sample_rate + 0.5);
    if (win < 1 || step < 1) throw ConfigError("slide_windows: window and step must span >= 1 sample");
    if (win > t_raw) throw ConfigError("slide_windows: window longer than trial");
    if (static_cast<std::size_t>(t_raw) * d_raw != raw.size()) {
        throw ConfigError("slide_windows: raw size does not match t_raw x d_raw");
    }
    const int windows = (t_raw - win) / step + 1;
    std::vector<double> out(static_cast<std::size_t>(windows) * win * d_raw);
    for (int w = 0; w < windows; ++w) {
        const std::size_t src = static_cast<std::size_t>(w) * step * d_raw;
        const std::size_t dst = static_cast<std::size_t>(w) * win * d_raw;
        std::copy(raw.begin() + static_cast<std::ptrdiff_t>(src),
                  raw.begin() + static_cast<std::ptrdiff_t>(src + static_cast<std::size_t>(win) * d_raw),
                  out.begin() + static_cast<std::ptrdiff_t>(dst));
    }
    if (out_windows) *out_windows = windows;
    return out;
}

std::vector<std::uint8_t> sample_presence(int rows, int modalities, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0) throw ConfigError("presence rate must be in [0,1], got " + format_g9(rate));
    if (rate > 0.4) {
        std::cerr << "warning: missing rate " << format_g9(rate) << " exceeds the studied range [0,0.4]\n";
    }
    std::vector<std::uint8_t> presence(static_cast<std::size_t>(rows) * modalities, 1);
    for (int r = 0; r < rows; ++r) {
        bool any = false;
        for (int m = 0; m < modalities; ++m) {
            const bool absent = rng.uniform01() < rate;
            presence[static_cast<std::size_t>(r) * modalities + m] = absent ? 0 : 1;
            any = any || !absent;
        }
        if (!any) {  // repair: force one uniformly chosen modality present
            const int m = rng.uniform_int(0, modalities - 1);
            presence[static_cast<std::size_t>(r) * modalities + m] = 1;
        }
    }
    return presence;
}

// ---- bundle generation ---------------------------------------------------------

namespace {

SplitData generate_split(const GeneratorConfig& cfg, const std::vector<MixingParams>& maps,
                         const std::string& split, int trials, std::uint64_t seed) {
    SplitData data;
    const int m_count = static_cast<int>(cfg.modalities.size());
    data.modality_names.reserve(cfg.modalities.size());
    for (const ModalitySpec& m : cfg.modalities) data.modality_names.push_back(m.name);
    data.feature_dims.resize(cfg.modalities.size());
    data.features.resize(cfg.modalities.size());
    for (int m = 0; m < m_count; ++m) {
        data.feature_dims[static_cast<std::size_t>(m)] = cfg.window_len() * cfg.modalities[static_cast<std::size_t>(m)].d_raw;
    }

    const int win = cfg.window_len();
    const int step = cfg.step_len();
    for (int trial = 0; trial < trials; ++trial) {
        Rng latent_rng(derive_seed(seed, split + ".latent", static_cast<std::uint64_t>(trial)));
        const LatentTrajectory latent = generate_latent(cfg, latent_rng);
        int windows = 0;
        for (int m = 0; m < m_count; ++m) {
            const ModalitySpec& spec = cfg.modalities[static_cast<std::size_t>(m)];
            Rng noise_rng(derive_seed(seed, split + ".noise." + spec.name, static_cast<std::uint64_t>(trial)));
            const ModalityStream stream =
                synthesize_modality(latent, spec, maps[static_cast<std::size_t>(m)], noise_rng);
            auto wins = slide_windows(stream.raw, stream.t_raw, stream.d_raw, cfg.window_s, cfg.step_s,
                                      cfg.sample_rate, &windows);
            auto& dst = data.features[static_cast<std::size_t>(m)];
            dst.insert(dst.end(), wins.begin(), wins.end());
        }
        for (int w = 0; w < windows; ++w) {
            const int label_t = w * step + win - 1;  // window label = latent at the window's last sample
            for (int d = 0; d < cfg.emo_dims; ++d) data.labels.push_back(latent.at(label_t, d));
            data.trial_of_row.push_back(trial);
        }
        data.rows += windows;
    }

    Rng presence_rng(derive_seed(seed, split + ".presence"));
    data.presence = sample_presence(data.rows, m_count, cfg.missing_rate, presence_rng);

    data.label_mask.assign(static_cast<std::size_t>(data.rows) * cfg.emo_dims, 1);
    if (cfg.label_missing_rate > 0.0) {
        Rng mask_rng(derive_seed(seed, split + ".label_mask"));
        for (auto& cell : data.label_mask) cell = mask_rng.uniform01() < cfg.label_missing_rate ? 0 : 1;
    }

    // Snap floats through the serialized form so write -> read is an identity.
    for (auto& feat : data.features)
        for (double& v : feat) v = quantize_g9(v);
    for (double& v : data.labels) v = quantize_g9(v);
    return data;
}

}  // namespace

DatasetBundle generate(const GeneratorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    DatasetBundle bundle;

    // The mixing maps are shared by all splits: one fixed world per seed.
    std::vector<MixingParams> maps;
    maps.reserve(cfg.modalities.size());
    for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
        Rng map_rng(derive_seed(seed, "mixing." + cfg.modalities[m].name));
        maps.push_back(make_mixing(cfg, cfg.modalities[m], static_cast<int>(m), map_rng));
    }

    bundle.train = generate_split(cfg, maps, "train", cfg.trials_train, seed);
    bundle.val = generate_split(cfg, maps, "val", cfg.trials_val, seed);
    bundle.test = generate_split(cfg, maps, "test", cfg.trials_test, seed);

    DatasetManifest& man = bundle.manifest;
    man.modalities = cfg.modalities;
    man.window_s = cfg.window_s;
    man.step_s = cfg.step_s;
    man.sample_rate = cfg.sample_rate;
    man.trial_len_s = cfg.trial_len_s;
    man.emo_dims = cfg.emo_dims;
    man.dim_names = cfg.dim_names;
    man.rows_train = bundle.train.rows;
    man.rows_val = bundle.val.rows;
    man.rows_test = bundle.test.rows;
    man.trials_train = cfg.trials_train;
    man.trials_val = cfg.trials_val;
    man.trials_test = cfg.trials_test;
    man.generator_seed = seed;
    man.missing_rate = cfg.missing_rate;
    man.label_missing_rate = cfg.label_missing_rate;
    man.map_kind = cfg.map_kind == MixingMap::kIdentity ? "identity" : "random";
    man.map_gain = cfg.map_gain;
    man.coverage_dims = cfg.coverage_dims;
    man.freq_lo_hz = cfg.freq_lo_hz;
    man.freq_hi_hz = cfg.freq_hi_hz;
    man.min_sinusoids = cfg.min_sinusoids;
    man.max_sinusoids = cfg.max_sinusoids;
    man.smoothness_bound = cfg.smoothness_bound;
    return bundle;
}

std::size_t DatasetBundle::total_cells() const {
    std::size_t cells = 0;
    for (const SplitData* s : {&train, &val, &test}) {
        for (const auto& f : s->features) cells += f.size();
        cells += s->labels.size() + s->presence.size() + s->label_mask.size();
    }
    return cells;
}

// ---- manifest JSON ------------------------------------------------------------

std::string DatasetManifest::to_json() const {
    nlohmann::ordered_json j;
    j["format"] = "himoe-dataset-v1";
    j["modalities"] = nlohmann::ordered_json::array();
    for (const ModalitySpec& m : modalities) {
        j["modalities"].push_back({{"name", m.name},
                                   {"d_raw", m.d_raw},
                                   {"lag_steps", m.lag_steps},
                                   {"noise_std", m.noise_std},
                                   {"coverage_dims", m.coverage_dims}});
    }
    j["window_s"] = window_s;
    j["step_s"] = step_s;
    j["sample_rate"] = sample_rate;
    j["trial_len_s"] = trial_len_s;
    j["emo_dims"] = emo_dims;
    j["dim_names"] = dim_names;
    j["rows"] = {{"train", rows_train}, {"val", rows_val}, {"test", rows_test}};
    j["trials"] = {{"train", trials_train}, {"val", trials_val}, {"test", trials_test}};
    j["generator_seed"] = generator_seed;
    j["missing_rate"] = missing_rate;
    j["label_missing_rate"] = label_missing_rate;
    j["map_kind"] = map_kind;
    j["map_gain"] = map_gain;
    j["coverage_dims"] = coverage_dims;
    j["freq_lo_hz"] = freq_lo_hz;
    j["freq_hi_hz"] = freq_hi_hz;
    j["min_sinusoids"] = min_sinusoids;
    j["max_sinusoids"] = max_sinusoids;
    j["smoothness_bound"] = smoothness_bound;
    return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest parse failure: ") + e.what());
    }
    DatasetManifest man;
    try {
        if (j.at("format").get<std::string>() != "himoe-dataset-v1") {
            throw FormatError("unsupported manifest format " + j.at("format").get<std::string>());
        }
        for (const auto& m : j.at("modalities")) {
            ModalitySpec spec;
            spec.name = m.at("name").get<std::string>();
            spec.d_raw = m.at("d_raw").get<int>();
            spec.lag_steps = m.at("lag_steps").get<int>();
            spec.noise_std = m.at("noise_std").get<double>();
            spec.coverage_dims = m.value("coverage_dims", -1);
            man.modalities.push_back(spec);
        }
        man.window_s = j.at("window_s").get<double>();
        man.step_s = j.at("step_s").get<double>();
        man.sample_rate = j.at("sample_rate").get<double>();
        man.trial_len_s = j.at("trial_len_s").get<double>();
        man.emo_dims = j.at("emo_dims").get<int>();
        man.dim_names = j.at("dim_names").get<std::vector<std::string>>();
        man.rows_train = j.at("rows").at("train").get<int>();
        man.rows_val = j.at("rows").at("val").get<int>();
        man.rows_test = j.at("rows").at("test").get<int>();
        man.trials_train = j.at("trials").at("train").get<int>();
        man.trials_val = j.at("trials").at("val").get<int>();
        man.trials_test = j.at("trials").at("test").get<int>();
        man.generator_seed = j.at("generator_seed").get<std::uint64_t>();
        man.missing_rate = j.at("missing_rate").get<double>();
        man.label_missing_rate = j.at("label_missing_rate").get<double>();
        man.map_kind = j.at("map_kind").get<std::string>();
        man.map_gain = j.at("map_gain").get<double>();
        man.coverage_dims = j.at("coverage_dims").get<int>();
        man.freq_lo_hz = j.at("freq_lo_hz").get<double>();
        man.freq_hi_hz = j.at("freq_hi_hz").get<double>();
        man.min_sinusoids = j.at("min_sinusoids").get<int>();
        man.max_sinusoids = j.at("max_sinusoids").get<int>();
        man.smoothness_bound = j.at("smoothness_bound").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest field failure: ") + e.what());
    }
    return man;
}

// ---- CSV IO ---------------------------------------------------------------------

namespace {

std::string float_csv(const std::vector<std::string>& header, const std::vector<double>& data, int cols) {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) os << ',';
        os << header[i];
    }
    os << '\n';
    const std::size_t rows = data.size() / static_cast<std::size_t>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (c) os << ',';
            os << format_g9(data[r * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]);
        }
        os << '\n';
    }
    return os.str();
}

std::string bool_csv(const std::vector<std::string>& header, const std::vector<std::uint8_t>& data,
                     int cols) {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) os << ',';
        os << header[i];
    }
    os << '\n';
    const std::size_t rows = data.size() / static_cast<std::size_t>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (c) os << ',';
            os << (data[r * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)] ? '1' : '0');
        }
        os << '\n';
    }
    return os.str();
}

void parse_csv(const std::string& path, const std::vector<std::string>& expected_header, int expected_rows,
               const std::function<void(const std::vector<std::string>&)>& on_row) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty file " + path);
    const auto header = split_csv_line(line);
    if (header != expected_header) {
        throw FormatError("header mismatch in " + path + " (got " + std::to_string(header.size()) +
                          " columns, first='" + (header.empty() ? "" : header[0]) + "')");
    }
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != expected_header.size()) {
            throw FormatError("row " + std::to_string(rows + 1) + " in " + path + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(expected_header.size()));
        }
        on_row(fields);
        ++rows;
    }
    if (rows != expected_rows) {
        throw FormatError("row count mismatch in " + path + ": got " + std::to_string(rows) +
                          ", manifest says " + std::to_string(expected_rows));
    }
}

std::vector<std::string> feature_header(int n) {
    std::vector<std::string> h(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) h[static_cast<std::size_t>(i)] = "f" + std::to_string(i);
    return h;
}

void write_split(const SplitData& data, const DatasetManifest& man, const std::string& dir,
                 const std::string& split) {
    for (int m = 0; m < data.modality_count(); ++m) {
        const int cols = data.feature_dims[static_cast<std::size_t>(m)];
        write_text_file(dir + "/" + split + "." + data.modality_names[static_cast<std::size_t>(m)] + ".csv",
                        float_csv(feature_header(cols), data.features[static_cast<std::size_t>(m)], cols));
    }
    write_text_file(dir + "/" + split + ".labels.csv", float_csv(man.dim_names, data.labels, man.emo_dims));
    write_text_file(dir + "/" + split + ".presence.csv",
                    bool_csv(data.modality_names, data.presence, data.modality_count()));
    std::vector<std::string> mask_header;
    mask_header.reserve(man.dim_names.size());
    for (const std::string& d : man.dim_names) mask_header.push_back(d);
    write_text_file(dir + "/" + split + ".label_mask.csv", bool_csv(mask_header, data.label_mask, man.emo_dims));
}

SplitData read_split(const DatasetManifest& man, const std::string& dir, const std::string& split,
                     int expected_rows) {
    SplitData data;
    data.rows = expected_rows;
    const int m_count = static_cast<int>(man.modalities.size());
    const int win = static_cast<int>(man.window_s * man.sample_rate + 0.5);
    for (const ModalitySpec& spec : man.modalities) {
        data.modality_names.push_back(spec.name);
        data.feature_dims.push_back(win * spec.d_raw);
    }
    data.features.resize(static_cast<std::size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
        const int cols = data.feature_dims[static_cast<std::size_t>(m)];
        auto& dst = data.features[static_cast<std::size_t>(m)];
        dst.reserve(static_cast<std::size_t>(expected_rows) * cols);
        const std::string path = dir + "/" + split + "." + data.modality_names[static_cast<std::size_t>(m)] + ".csv";
        parse_csv(path, feature_header(cols), expected_rows, [&](const std::vector<std::string>& f) {
            for (const std::string& s : f) dst.push_back(parse_double(s, path));
        });
    }
    {
        const std::string path = dir + "/" + split + ".labels.csv";
        data.labels.reserve(static_cast<std::size_t>(expected_rows) * man.emo_dims);
        parse_csv(path, man.dim_names, expected_rows, [&](const std::vector<std::string>& f) {
            for (const std::string& s : f) data.labels.push_back(parse_double(s, path));
        });
    }
    {
        const std::string path = dir + "/" + split + ".presence.csv";
        data.presence.reserve(static_cast<std::size_t>(expected_rows) * m_count);
        parse_csv(path, data.modality_names, expected_rows, [&](const std::vector<std::string>& f) {
            for (const std::string& s : f) {
                if (s != "0" && s != "1") throw FormatError("presence cell must be 0/1 in " + path);
                data.presence.push_back(s == "1" ? 1 : 0);
            }
        });
    }
    {
        const std::string path = dir + "/" + split + ".label_mask.csv";
        data.label_mask.reserve(static_cast<std::size_t>(expected_rows) * man.emo_dims);
        parse_csv(path, man.dim_names, expected_rows, [&](const std::vector<std::string>& f) {
            for (const std::string& s : f) {
                if (s != "0" && s != "1") throw FormatError("label_mask cell must be 0/1 in " + path);
                data.label_mask.push_back(s == "1" ? 1 : 0);
            }
        });
    }
    return data;
}

}  // namespace

void write_dataset(const DatasetBundle& bundle, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_text_file(dir + "/manifest.json", bundle.manifest.to_json());
    write_split(bundle.train, bundle.manifest, dir, "train");
    write_split(bundle.val, bundle.manifest, dir, "val");
    write_split(bundle.test, bundle.manifest, dir, "test");
}

DatasetBundle read_dataset(const std::string& dir) {
    DatasetBundle bundle;
    bundle.manifest = DatasetManifest::from_json(read_text_file(dir + "/manifest.json"));
    bundle.train = read_split(bundle.manifest, dir, "train", bundle.manifest.rows_train);
    bundle.val = read_split(bundle.manifest, dir, "val", bundle.manifest.rows_val);
    bundle.test = read_split(bundle.manifest, dir, "test", bundle.manifest.rows_test);
    return bundle;
}

bool split_equal(const SplitData& a, const SplitData& b) {
    return a.rows == b.rows && a.modality_names == b.modality_names && a.feature_dims == b.feature_dims &&
           a.features == b.features && a.presence == b.presence && a.labels == b.labels &&
           a.label_mask == b.label_mask;
}

}  // namespace himoe
