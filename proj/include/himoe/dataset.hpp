#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "himoe/rng.hpp"

namespace himoe {

// Synthetic multimodal laboratory: ground-truth latent emotion trajectories,
// per-modality lagged observations, sliding-window segmentation, presence
// masks and a reproducible on-disk CSV format.

struct ModalitySpec {
    std::string name;
    int d_raw = 6;          // raw channels
    int lag_steps = 0;      // response lag in samples
    double noise_std = 0.05;
    int coverage_dims = -1;  // emotion dims this modality observes; -1 -> global default
};

enum class MixingMap { kRandom, kIdentity };

struct GeneratorConfig {
    std::vector<ModalitySpec> modalities;  // M >= 2
    int trials_train = 69;
    int trials_val = 18;
    int trials_test = 18;
    double trial_len_s = 60.0;
    double sample_rate = 8.0;  // Hz
    double window_s = 4.0;
    double step_s = 2.0;
    int emo_dims = 4;
    std::vector<std::string> dim_names = {"valence", "arousal", "dominance", "liking"};
    int min_sinusoids = 3;
    int max_sinusoids = 6;
    double freq_lo_hz = 0.03;
    double freq_hi_hz = 0.12;
    double smoothness_bound = 2.0;  // max |v[t+1]-v[t]| on the 1..9 scale
    double missing_rate = 0.0;      // stored presence mask
    double label_missing_rate = 0.0;
    MixingMap map_kind = MixingMap::kRandom;
    double map_gain = 2.0;   // scales the random map; larger -> deeper tanh saturation
    int coverage_dims = 2;   // emotion dims observed per modality (0 = all)

    int t_raw() const { return static_cast<int>(trial_len_s * sample_rate + 0.5); }
    int window_len() const { return static_cast<int>(window_s * sample_rate + 0.5); }
    int step_len() const { return static_cast<int>(step_s * sample_rate + 0.5); }

    static GeneratorConfig default_desk_scale();
    void validate() const;
};

// Ground-truth emotion trajectory on the 1..9 Likert scale; row-major
// t_raw x dims.
struct LatentTrajectory {
    int t_raw = 0;
    int dims = 0;
    double sample_rate = 0.0;
    std::vector<double> values;

    double at(int t, int d) const { return values[static_cast<std::size_t>(t) * dims + d]; }
    double max_step_delta() const;
};

// One observed modality: raw[t] is a deterministic map of the latent at
// t - lag_steps (clamped to the trial start) plus seeded noise.
struct ModalityStream {
    std::string name;
    int t_raw = 0;
    int d_raw = 0;
    int lag_steps = 0;
    double noise_std = 0.0;
    std::vector<double> raw;  // t_raw x d_raw
};

// Affine mixing map from latent (normalized to [-1,1]) to raw channels.
struct MixingParams {
    int d_raw = 0;
    int emo_dims = 0;
    std::vector<double> weight;  // d_raw x emo_dims
    std::vector<double> offset;  // d_raw
};

struct SplitData {
    int rows = 0;
    std::vector<std::string> modality_names;
    std::vector<int> feature_dims;              // per modality: window_len * d_raw
    std::vector<std::vector<double>> features;  // per modality: rows x feature_dims[m]
    std::vector<std::uint8_t> presence;         // rows x M
    std::vector<double> labels;                 // rows x emo_dims, values in [1,9]
    std::vector<std::uint8_t> label_mask;       // rows x emo_dims
    std::vector<int> trial_of_row;              // provenance, not serialized

    int modality_count() const { return static_cast<int>(modality_names.size()); }
    bool present(int row, int m) const {
        return presence[static_cast<std::size_t>(row) * modality_names.size() + m] != 0;
    }
};

struct DatasetManifest {
    std::vector<ModalitySpec> modalities;
    double window_s = 0.0, step_s = 0.0, sample_rate = 0.0;
    double trial_len_s = 0.0;
    int emo_dims = 0;
    std::vector<std::string> dim_names;
    int rows_train = 0, rows_val = 0, rows_test = 0;
    int trials_train = 0, trials_val = 0, trials_test = 0;
    std::uint64_t generator_seed = 0;
    double missing_rate = 0.0;
    double label_missing_rate = 0.0;
    std::string map_kind = "random";
    double map_gain = 1.0;
    int coverage_dims = 0;
    double freq_lo_hz = 0.0, freq_hi_hz = 0.0;
    int min_sinusoids = 0, max_sinusoids = 0;
    double smoothness_bound = 0.0;

    std::string to_json() const;
    static DatasetManifest from_json(const std::string& text);
};

struct DatasetBundle {
    DatasetManifest manifest;
    SplitData train, val, test;

    std::size_t total_cells() const;
};

// ---- generation ------------------------------------------------------------

LatentTrajectory generate_latent(const GeneratorConfig& cfg, Rng& rng);
// modality_index drives the round-robin choice of which emotion dimensions
// this modality observes when coverage_dims > 0.
MixingParams make_mixing(const GeneratorConfig& cfg, const ModalitySpec& spec, int modality_index,
                         Rng& rng);
ModalityStream synthesize_modality(const LatentTrajectory& latent, const ModalitySpec& spec,
                                   const MixingParams& map, Rng& rng);
// Inverse of the noiseless identity-map generator; test oracle for
// MixingMap::kIdentity streams.
std::vector<double> invert_identity_stream(const ModalityStream& stream, int emo_dims);

// Segments a t_raw x d_raw stream into floor((t_raw - win)/step) + 1 windows,
// each flattened row-major (time-major). Returns the window count through
// out_windows.
std::vector<double> slide_windows(const std::vector<double>& raw, int t_raw, int d_raw,
                                  double window_s, double step_s, double sample_rate,
                                  int* out_windows);

// Independent Bernoulli absence at the given rate; all-absent rows are
// repaired by forcing one uniformly chosen modality present. Warns on stderr
// above rate 0.4 (outside the studied range).
std::vector<std::uint8_t> sample_presence(int rows, int modalities, double rate, Rng& rng);

DatasetBundle generate(const GeneratorConfig& cfg, std::uint64_t seed);

// ---- on-disk format ----------------------------------------------------------
// One CSV per modality per split (<split>.<modality>.csv, header f0..f{n-1}),
// <split>.labels.csv, <split>.presence.csv and manifest.json. Values use the
// project 9-significant-digit form; read(write(bundle)) is an exact identity.

void write_dataset(const DatasetBundle& bundle, const std::string& dir);
DatasetBundle read_dataset(const std::string& dir);

bool split_equal(const SplitData& a, const SplitData& b);

}  // namespace himoe
