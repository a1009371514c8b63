#include "himoe/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "himoe/errors.hpp"
#include "himoe/rng.hpp"

namespace himoe {

ModelConfig ModelConfig::from_manifest(const DatasetManifest& manifest) {
    ModelConfig cfg;
    const int win = static_cast<int>(manifest.window_s * manifest.sample_rate + 0.5);
    for (const ModalitySpec& m : manifest.modalities) {
        cfg.modality_names.push_back(m.name);
        cfg.input_dims.push_back(win * m.d_raw);
    }
    cfg.dim_names = manifest.dim_names;
    cfg.head_modes.assign(manifest.dim_names.size(), HeadMode::kRegression);
    return cfg;
}

BatchView make_batch(const SplitData& split, const std::vector<int>& row_indices,
                     const std::vector<std::uint8_t>* presence_override) {
    const int m_count = split.modality_count();
    const int dims = split.rows > 0 ? static_cast<int>(split.labels.size()) / split.rows : 0;
    BatchView batch;
    batch.rows = static_cast<int>(row_indices.size());
    batch.features.reserve(static_cast<std::size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
        const int in_dim = split.feature_dims[static_cast<std::size_t>(m)];
        std::vector<double> data(static_cast<std::size_t>(batch.rows) * in_dim);
        const auto& src = split.features[static_cast<std::size_t>(m)];
        for (int r = 0; r < batch.rows; ++r) {
            const std::size_t src_off = static_cast<std::size_t>(row_indices[static_cast<std::size_t>(r)]) * in_dim;
            std::memcpy(data.data() + static_cast<std::size_t>(r) * in_dim, src.data() + src_off,
                        static_cast<std::size_t>(in_dim) * sizeof(double));
        }
        batch.features.push_back(Tensor::from_data({batch.rows, in_dim}, std::move(data)));
    }
    batch.presence.resize(static_cast<std::size_t>(batch.rows) * m_count);
    batch.labels.resize(static_cast<std::size_t>(batch.rows) * dims);
    batch.label_mask.resize(static_cast<std::size_t>(batch.rows) * dims);
    for (int r = 0; r < batch.rows; ++r) {
        const int src_row = row_indices[static_cast<std::size_t>(r)];
        for (int m = 0; m < m_count; ++m) {
            std::uint8_t p = split.presence[static_cast<std::size_t>(src_row) * m_count + m];
            if (presence_override) {
                p = static_cast<std::uint8_t>(p && (*presence_override)[static_cast<std::size_t>(r) * m_count + m]);
            }
            batch.presence[static_cast<std::size_t>(r) * m_count + m] = p;
        }
        for (int d = 0; d < dims; ++d) {
            batch.labels[static_cast<std::size_t>(r) * dims + d] =
                split.labels[static_cast<std::size_t>(src_row) * dims + d];
            batch.label_mask[static_cast<std::size_t>(r) * dims + d] =
                split.label_mask[static_cast<std::size_t>(src_row) * dims + d];
        }
    }
    // Keep the fuse precondition: never let an override strip every modality.
    for (int r = 0; r < batch.rows; ++r) {
        bool any = false;
        for (int m = 0; m < m_count; ++m) any = any || batch.presence[static_cast<std::size_t>(r) * m_count + m];
        if (!any) {
            const int src_row = row_indices[static_cast<std::size_t>(r)];
            for (int m = 0; m < m_count; ++m) {
                if (split.presence[static_cast<std::size_t>(src_row) * m_count + m]) {
                    batch.presence[static_cast<std::size_t>(r) * m_count + m] = 1;
                    any = true;
                    break;
                }
            }
            if (!any) batch.presence[static_cast<std::size_t>(r) * m_count] = 1;
        }
    }
    return batch;
}

namespace {

void check_batch(const ModelConfig& cfg, const BatchView& batch) {
    if (static_cast<int>(batch.features.size()) != cfg.modalities()) {
        throw DimensionError("forward: batch has " + std::to_string(batch.features.size()) +
                             " modalities, model wants " + std::to_string(cfg.modalities()));
    }
    for (int m = 0; m < cfg.modalities(); ++m) {
        if (batch.features[static_cast<std::size_t>(m)].dim(1) != cfg.input_dims[static_cast<std::size_t>(m)]) {
            throw DimensionError("forward: modality " + cfg.modality_names[static_cast<std::size_t>(m)] +
                                 " feature width " +
                                 std::to_string(batch.features[static_cast<std::size_t>(m)].dim(1)) +
                                 " != expected " +
                                 std::to_string(cfg.input_dims[static_cast<std::size_t>(m)]));
        }
    }
}

// Absent rows are zeroed before encoding so upstream garbage can never leak
// into any output, and again after encoding per the zero-vector protocol.
std::vector<Tensor> encode_masked(const std::vector<EncoderParams>& encoders, const BatchView& batch) {
    const int m_count = static_cast<int>(encoders.size());
    std::vector<Tensor> encoded(static_cast<std::size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
        std::vector<std::uint8_t> keep(static_cast<std::size_t>(batch.rows));
        for (int r = 0; r < batch.rows; ++r)
            keep[static_cast<std::size_t>(r)] = batch.presence[static_cast<std::size_t>(r) * m_count + m];
        const Tensor masked_input = mask_rows(batch.features[static_cast<std::size_t>(m)], keep);
        encoded[static_cast<std::size_t>(m)] = encode(encoders[static_cast<std::size_t>(m)], masked_input);
    }
    return encoded;
}

}  // namespace

HiMoeModel::HiMoeModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.modalities() < 1) throw ConfigError("model needs at least one modality");
    for (int m = 0; m < cfg_.modalities(); ++m) {
        Rng enc_rng(derive_seed(seed, "enc." + cfg_.modality_names[static_cast<std::size_t>(m)]));
        encoders_.push_back(EncoderParams::init(cfg_.modality_names[static_cast<std::size_t>(m)],
                                                cfg_.input_dims[static_cast<std::size_t>(m)],
                                                cfg_.encoder_hidden, cfg_.feature_dim, enc_rng));
        Rng bank_rng(derive_seed(seed, "bank." + cfg_.modality_names[static_cast<std::size_t>(m)]));
        banks_.push_back(ModalityBankParams::init(cfg_.modality_names[static_cast<std::size_t>(m)],
                                                  cfg_.feature_dim, cfg_.modality_experts, bank_rng));
    }
    Rng fusion_rng(derive_seed(seed, "fusion"));
    fusion_ = FusionParams::init(cfg_.feature_dim, cfg_.modalities(), fusion_rng);
    Rng emotion_rng(derive_seed(seed, "emotion"));
    emotion_ = EmotionBankParams::init(cfg_.feature_dim, cfg_.emotion_experts, emotion_rng);
    Rng head_rng(derive_seed(seed, "heads"));
    heads_ = HeadParams::init(cfg_.dim_names, cfg_.head_modes, cfg_.feature_dim, head_rng);
}

ForwardOut HiMoeModel::forward(const BatchView& batch) const {
    check_batch(cfg_, batch);
    ForwardOut out;
    out.encoded = encode_masked(encoders_, batch);
    ModalityBankOut bank = modality_bank_forward(banks_, fusion_, out.encoded, batch.presence,
                                                 cfg_.uniform_routing);
    out.fused = bank.fused;
    out.fusion_weights = bank.fusion_weights;
    out.gates = std::move(bank.gates);
    if (cfg_.use_emotion_bank) {
        const EmotionRoute route = da_route(emotion_, out.fused);
        out.beta = route.beta;
        out.head_features = emotion_mix(emotion_, route);
    } else {
        out.head_features = out.fused;
    }
    out.heads = predict(heads_, out.head_features);
    return out;
}

std::vector<NamedParam> HiMoeModel::named_params() const {
    std::vector<NamedParam> out;
    for (int m = 0; m < cfg_.modalities(); ++m) {
        const auto& name = cfg_.modality_names[static_cast<std::size_t>(m)];
        auto enc = encoders_[static_cast<std::size_t>(m)].named_params("enc." + name);
        out.insert(out.end(), enc.begin(), enc.end());
        auto bank = banks_[static_cast<std::size_t>(m)].named_params("bank." + name);
        out.insert(out.end(), bank.begin(), bank.end());
    }
    auto fusion = fusion_.named_params("fusion");
    out.insert(out.end(), fusion.begin(), fusion.end());
    if (cfg_.use_emotion_bank) {
        auto emotion = emotion_.named_params("emotion");
        out.insert(out.end(), emotion.begin(), emotion.end());
    }
    auto heads = heads_.named_params("head");
    out.insert(out.end(), heads.begin(), heads.end());
    return out;
}

BaselineModel::BaselineModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.modalities() < 1) throw ConfigError("model needs at least one modality");
    for (int m = 0; m < cfg_.modalities(); ++m) {
        Rng enc_rng(derive_seed(seed, "enc." + cfg_.modality_names[static_cast<std::size_t>(m)]));
        encoders_.push_back(EncoderParams::init(cfg_.modality_names[static_cast<std::size_t>(m)],
                                                cfg_.input_dims[static_cast<std::size_t>(m)],
                                                cfg_.encoder_hidden, cfg_.feature_dim, enc_rng));
    }
    Rng head_rng(derive_seed(seed, "heads"));
    heads_ = HeadParams::init(cfg_.dim_names, cfg_.head_modes, cfg_.feature_dim, head_rng);
}

ForwardOut BaselineModel::forward(const BatchView& batch) const {
    check_batch(cfg_, batch);
    const int m_count = cfg_.modalities();
    ForwardOut out;
    out.encoded = encode_masked(encoders_, batch);

    // Zero imputation: absent modalities contribute exact zero vectors and
    // the mean always divides by M.
    Tensor pooled;
    for (int m = 0; m < m_count; ++m) {
        std::vector<std::uint8_t> keep(static_cast<std::size_t>(batch.rows));
        for (int r = 0; r < batch.rows; ++r)
            keep[static_cast<std::size_t>(r)] = batch.presence[static_cast<std::size_t>(r) * m_count + m];
        const Tensor z = mask_rows(out.encoded[static_cast<std::size_t>(m)], keep);
        pooled = m == 0 ? z : add(pooled, z);
    }
    out.fused = scale(pooled, 1.0 / static_cast<double>(m_count));
    out.head_features = out.fused;
    out.heads = predict(heads_, out.head_features);
    return out;
}

std::vector<NamedParam> BaselineModel::named_params() const {
    std::vector<NamedParam> out;
    for (int m = 0; m < cfg_.modalities(); ++m) {
        auto enc = encoders_[static_cast<std::size_t>(m)].named_params(
            "enc." + cfg_.modality_names[static_cast<std::size_t>(m)]);
        out.insert(out.end(), enc.begin(), enc.end());
    }
    auto heads = heads_.named_params("head");
    out.insert(out.end(), heads.begin(), heads.end());
    return out;
}

std::unique_ptr<Model> make_model(const std::string& kind, const ModelConfig& cfg, std::uint64_t seed) {
    if (kind == "full") return std::make_unique<HiMoeModel>(cfg, seed);
    if (kind == "baseline") return std::make_unique<BaselineModel>(cfg, seed);
    throw ConfigError("unknown model '" + kind + "' (want full|baseline)");
}

// ---- checkpoint ----------------------------------------------------------------

void save_checkpoint(const std::vector<NamedParam>& params, const std::string& base_path) {
    static_assert(std::endian::native == std::endian::little,
                  "checkpoint format is little-endian; byte swapping is not implemented");
    std::ofstream bin(base_path + ".bin", std::ios::binary);
    std::ofstream idx(base_path + ".idx");
    if (!bin || !idx) throw FormatError("cannot write checkpoint at " + base_path);
    idx << "himoe-checkpoint-v1\n";
    std::size_t offset = 0;
    for (const NamedParam& p : params) {
        const auto data = p.tensor.data();
        bin.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(double)));
        idx << p.name << ' ' << p.tensor.rank();
        for (int i = 0; i < p.tensor.rank(); ++i) idx << ' ' << p.tensor.dim(i);
        idx << ' ' << offset << ' ' << data.size() << '\n';
        offset += data.size();
    }
    if (!bin || !idx) throw FormatError("checkpoint write failed at " + base_path);
}

void load_checkpoint(const std::vector<NamedParam>& params, const std::string& base_path) {
    std::ifstream bin(base_path + ".bin", std::ios::binary);
    std::ifstream idx(base_path + ".idx");
    if (!bin) throw FormatError("missing checkpoint data " + base_path + ".bin");
    if (!idx) throw FormatError("missing checkpoint index " + base_path + ".idx");
    std::string header;
    std::getline(idx, header);
    if (header != "himoe-checkpoint-v1") throw FormatError("bad checkpoint header '" + header + "'");

    struct Entry {
        std::vector<int> shape;
        std::size_t offset = 0;
        std::size_t count = 0;
    };
    std::unordered_map<std::string, Entry> entries;
    std::string line;
    while (std::getline(idx, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string name;
        int rank = 0;
        Entry e;
        if (!(is >> name >> rank)) throw FormatError("bad checkpoint index line: " + line);
        e.shape.resize(static_cast<std::size_t>(rank));
        for (int i = 0; i < rank; ++i) {
            if (!(is >> e.shape[static_cast<std::size_t>(i)]))
                throw FormatError("bad checkpoint index line: " + line);
        }
        if (!(is >> e.offset >> e.count)) throw FormatError("bad checkpoint index line: " + line);
        entries[name] = std::move(e);
    }

    for (const NamedParam& p : params) {
        const auto it = entries.find(p.name);
        if (it == entries.end()) throw FormatError("checkpoint missing tensor '" + p.name + "'");
        const Entry& e = it->second;
        if (e.shape != p.tensor.shape()) {
            throw FormatError("checkpoint tensor '" + p.name + "' has shape " + shape_str(e.shape) +
                              ", model wants " + shape_str(p.tensor.shape()));
        }
        Tensor t = p.tensor;
        auto dst = t.mutable_data();
        bin.seekg(static_cast<std::streamoff>(e.offset * sizeof(double)));
        bin.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(e.count * sizeof(double)));
        if (!bin) throw FormatError("checkpoint data truncated for tensor '" + p.name + "'");
    }
}

}  // namespace himoe
