#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vcs/manifest.hpp"
#include "vcs/mat.hpp"
#include "vcs/model.hpp"

namespace vcs {

struct TrainConfig {
    double learning_rate = 5e-6;
    int batch_size = 48;
    int epochs = 90;
    int checkpoint_every = 5;  // epochs
    double alpha = 1.0;        // weight of the feature prediction loss
    uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct BatchLossBreakdown {
    double l_clap = 0.0;
    double l_feat_audio = 0.0;
    double l_feat_text = 0.0;
    double l_feat_cross = 0.0;
    double l_feat = 0.0;
    double total = 0.0;
};

// Symmetric contrastive loss over the scaled similarity matrix: mean of the
// row-softmax and column-softmax negative log-likelihoods at the diagonal,
// (1/2N) sum_i [nll_row_i + nll_col_i].
double clap_loss(const Mat& sim);

struct FeatLosses {
    double audio = 0.0;
    double text = 0.0;
    double cross = 0.0;
};

// Sums of unsquared Euclidean norms over the batch:
// audio: sum_i |fgt_i - fa_i|, text: sum_i |fgt_i - ft_i|,
// cross: sum_i |fa_i - ft_i|.
FeatLosses feat_loss(const Mat& fgt, const Mat& fa, const Mat& ft);

BatchLossBreakdown total_loss(double l_clap, const FeatLosses& feat, double alpha);

struct TrainBatch {
    size_t n = 0;
    std::vector<float> audio;  // n x audio_in_dim
    std::vector<float> text;   // n x text_in_dim
    Mat fgt;                   // n x 3, already in normalized feature space
};

struct BackwardResult {
    BatchLossBreakdown loss;
    std::vector<double> grad;  // packed, matches make_layout(model.config)
};

// Exact analytic gradients of total = l_clap + alpha * l_feat with respect to
// every trainable parameter. Subgradient of each norm term at the origin
// is 0; gradients never flow into the frozen inputs.
BackwardResult backward(const RetrievalModel& model, const TrainBatch& batch, double alpha);

// Packed-parameter variants used by the optimizer and the finite-difference
// oracle.
BackwardResult backward_packed(const ModelConfig& cfg, const ParamLayout& layout,
                               std::span<const double> params, const TrainBatch& batch,
                               double alpha, bool tau_learnable);
double loss_packed(const ModelConfig& cfg, const ParamLayout& layout,
                   std::span<const double> params, const TrainBatch& batch, double alpha);

struct GradCheckTensor {
    std::string tensor;
    double max_rel_err = 0.0;
    double max_abs_analytic = 0.0;
    double max_abs_fd = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckTensor> tensors;  // one entry per parameter tensor
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

// Central finite differences against the analytic gradients,
// parameter by parameter, in 64-bit arithmetic.
GradCheckReport grad_check(const RetrievalModel& model, const TrainBatch& batch, double alpha,
                           double h, double tolerance);

struct TrainingSet {
    std::vector<std::string> ids;
    std::vector<float> audio;                        // n x audio_in_dim
    std::vector<float> text;                         // n x text_in_dim
    std::vector<SpeechFeatures> features;            // raw, unnormalized
    std::vector<std::optional<GenderLabel>> gender;  // for the validation metric

    size_t size() const { return ids.size(); }
};

struct EpochLog {
    int epoch = 0;
    BatchLossBreakdown mean_loss;  // averaged over the epoch's batches
    std::optional<double> valid_gender_acc_at_10;
};

struct TrainResult {
    RetrievalModel model;
    std::vector<EpochLog> log;
    int best_epoch = 0;  // by validation gender accuracy; last epoch if absent
};

// Adam over shuffled batches (partial final batch dropped), checkpoints every
// checkpoint_every epochs plus a final one when checkpoint_dir is given.
// Fits the feature normalizer on the training set when the model has none.
// Deterministic per seed.
TrainResult train(RetrievalModel model, const TrainingSet& train_set,
                  const TrainingSet& valid_set, const TrainConfig& cfg,
                  const std::filesystem::path* checkpoint_dir = nullptr);

}  // namespace vcs
