#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vcs/features.hpp"
#include "vcs/mat.hpp"

namespace vcs {

inline double default_tau_init() { return 1.0 / std::log(1.0 / 0.07); }

inline constexpr double kTauMin = 1e-3;
inline constexpr double kTauMax = 100.0;

struct ModelConfig {
    int audio_in_dim = 0;  // frozen encoder output dims; configuration, not constants
    int text_in_dim = 0;
    int embed_dim = 512;
    int proj_hidden_dim = 512;
    int feat_hidden_dim = 512;
    int feat_out_dim = 3;
    double tau_init = default_tau_init();
    bool tau_learnable = true;
    uint64_t seed = 0;
};

void validate_config(const ModelConfig& cfg);

// Weights are row-major out x in. float32 is the canonical parameter
// precision (checkpoints round-trip bit-exactly); all arithmetic promotes to
// double.
struct LinearLayer {
    int in = 0;
    int out = 0;
    std::vector<float> w;
    std::vector<float> b;
};

// Two linear layers with a ReLU in between.
struct TwoLayerMlp {
    LinearLayer l1;
    LinearLayer l2;
};

enum class Modality { audio, text };

struct RetrievalModel {
    ModelConfig config;
    TwoLayerMlp proj_audio;
    TwoLayerMlp proj_text;
    TwoLayerMlp feat_audio;
    TwoLayerMlp feat_text;
    float log_tau = 0.0f;
    std::optional<FeatureNormalizer> normalizer;

    double tau() const { return std::exp(double(log_tau)); }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights from the config seed,
// zero biases, log_tau = ln(tau_init). Deterministic per seed.
RetrievalModel init_model(const ModelConfig& cfg);

// Flat double-precision view of every trainable parameter, in a fixed order.
// The training loop, gradient checks, and checkpoints all speak this layout.
struct TensorSpec {
    std::string name;
    size_t offset = 0;
    size_t size = 0;
};

struct ParamLayout {
    std::vector<TensorSpec> tensors;
    size_t total = 0;
    size_t log_tau_offset = 0;
};

ParamLayout make_layout(const ModelConfig& cfg);
std::vector<double> pack_params(const RetrievalModel& model);
void unpack_params(std::span<const double> packed, RetrievalModel& model);

// Projects a frozen-encoder vector into the shared space:
// l2_normalize(W2 relu(W1 x + b1) + b2). Errors on a dimension mismatch or a
// zero vector before normalization.
std::vector<double> project(const RetrievalModel& model, Modality modality,
                            std::span<const float> x);

// Feature head on an embedding: two linear layers with a ReLU in between.
// Output lives in the normalized feature space.
std::array<double, 3> predict_features(const RetrievalModel& model, Modality modality,
                                       std::span<const double> embedding);

struct ForwardResult {
    Mat ea;   // N x embed_dim, unit rows
    Mat et;   // N x embed_dim, unit rows
    Mat fa;   // N x 3
    Mat ft;   // N x 3
    Mat sim;  // N x N, sim[i][j] = ea_i . et_j / tau
};

ForwardResult forward_batch(const RetrievalModel& model, std::span<const float> audio_in,
                            std::span<const float> text_in, size_t n);

// Single binary file: magic "CNMDL1\0\0", a JSON header (config +
// normalizer), then the packed parameters as float32 LE. Round-trips
// bit-exactly.
void save_checkpoint(const RetrievalModel& model, const std::filesystem::path& path);
RetrievalModel load_checkpoint(const std::filesystem::path& path);

namespace detail {

// Forward pass over the packed double parameters with every intermediate the
// backward pass needs. Shared by inference, training, and finite differences
// so there is exactly one forward implementation.
struct BatchTrace {
    size_t n = 0;
    Mat ha, ht;              // post-ReLU hidden of the projection heads
    Mat va, vt;              // pre-normalization embeddings
    std::vector<double> na;  // norms of va rows
    std::vector<double> nt;
    Mat ea, et;              // unit embeddings
    Mat ga, gt;              // post-ReLU hidden of the feature heads
    Mat fa, ft;              // feature predictions
    Mat sim;
    double tau = 0.0;
};

BatchTrace forward_trace(const ModelConfig& cfg, const ParamLayout& layout,
                         std::span<const double> params, std::span<const float> audio_in,
                         std::span<const float> text_in, size_t n);

}  // namespace detail

}  // namespace vcs
