#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "himoe/alignment.hpp"
#include "himoe/dataset.hpp"
#include "himoe/emotion_moe.hpp"
#include "himoe/encoder.hpp"
#include "himoe/heads.hpp"
#include "himoe/modality_moe.hpp"
#include "himoe/tensor.hpp"

namespace himoe {

struct ModelConfig {
    std::vector<std::string> modality_names;
    std::vector<int> input_dims;  // per modality: flattened window length
    int feature_dim = 32;         // d
    int encoder_hidden = 64;
    int modality_experts = 4;  // K
    int emotion_experts = 6;   // L
    std::vector<std::string> dim_names;
    std::vector<HeadMode> head_modes;
    bool use_emotion_bank = true;  // ablation: wire fused features straight to heads
    bool uniform_routing = false;  // ablation: constant 1/K gate weights

    int modalities() const { return static_cast<int>(modality_names.size()); }
    static ModelConfig from_manifest(const DatasetManifest& manifest);
};

// One training batch: constant feature tensors per modality plus presence,
// labels and label mask, all row-aligned.
struct BatchView {
    int rows = 0;
    std::vector<Tensor> features;        // per modality [B, in_dim]
    std::vector<std::uint8_t> presence;  // B x M
    std::vector<double> labels;          // B x D
    std::vector<std::uint8_t> label_mask;
};

// Materializes a batch from split rows. presence_override, when given, is
// row-major [rows x M] and replaces the stored mask via logical AND.
BatchView make_batch(const SplitData& split, const std::vector<int>& row_indices,
                     const std::vector<std::uint8_t>* presence_override = nullptr);

struct ForwardOut {
    std::vector<Tensor> encoded;  // per modality [B, d], inputs to alignment
    Tensor fused;                 // [B, d]
    Tensor fusion_weights;        // [B, M] (full model only)
    std::vector<Tensor> gates;    // per modality [B, K] (full model only)
    Tensor beta;                  // [B, L] (emotion bank only)
    Tensor head_features;         // [B, d]
    HeadOutput heads;
};

class Model {
public:
    virtual ~Model() = default;
    virtual ForwardOut forward(const BatchView& batch) const = 0;
    virtual std::vector<NamedParam> named_params() const = 0;
    virtual const ModelConfig& config() const = 0;
    virtual const HeadParams& heads() const = 0;
    virtual std::string kind() const = 0;
};

// The hierarchical model: per-modality encoders -> modality expert banks with
// soft gating and attention fusion -> emotion expert bank -> per-dimension
// heads.
class HiMoeModel : public Model {
public:
    HiMoeModel(const ModelConfig& cfg, std::uint64_t seed);

    ForwardOut forward(const BatchView& batch) const override;
    std::vector<NamedParam> named_params() const override;
    const ModelConfig& config() const override { return cfg_; }
    std::string kind() const override { return "full"; }

    const std::vector<EncoderParams>& encoders() const { return encoders_; }
    const std::vector<ModalityBankParams>& banks() const { return banks_; }
    const FusionParams& fusion() const { return fusion_; }
    const EmotionBankParams& emotion_bank() const { return emotion_; }
    const HeadParams& heads() const override { return heads_; }

private:
    ModelConfig cfg_;
    std::vector<EncoderParams> encoders_;
    std::vector<ModalityBankParams> banks_;
    FusionParams fusion_;
    EmotionBankParams emotion_;
    HeadParams heads_;
};

// Zero-imputation late-fusion reference: encoders, fixed 1/M mean pooling
// with absent modalities contributing exact zero vectors, shared head stack.
// No routing, no alignment, no experts.
class BaselineModel : public Model {
public:
    BaselineModel(const ModelConfig& cfg, std::uint64_t seed);

    ForwardOut forward(const BatchView& batch) const override;
    std::vector<NamedParam> named_params() const override;
    const ModelConfig& config() const override { return cfg_; }
    const HeadParams& heads() const override { return heads_; }
    std::string kind() const override { return "baseline"; }

private:
    ModelConfig cfg_;
    std::vector<EncoderParams> encoders_;
    HeadParams heads_;
};

std::unique_ptr<Model> make_model(const std::string& kind, const ModelConfig& cfg, std::uint64_t seed);

// Flat named-tensor checkpoint: <base>.bin holds little-endian 64-bit floats,
// <base>.idx is a text index of name, shape, offset and count per tensor.
void save_checkpoint(const std::vector<NamedParam>& params, const std::string& base_path);
void load_checkpoint(const std::vector<NamedParam>& params, const std::string& base_path);

}  // namespace himoe
