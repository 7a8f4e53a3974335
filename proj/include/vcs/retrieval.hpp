#pragma once

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vcs/manifest.hpp"
#include "vcs/mat.hpp"
#include "vcs/model.hpp"

namespace vcs {

// Immutable store of unit-norm audio embeddings plus per-row metadata.
struct EmbeddingIndex {
    std::vector<std::string> ids;
    Mat vectors;  // M x embed_dim, unit rows
    std::vector<SegmentRecord> records;
    std::unordered_map<std::string, size_t> row_of;

    size_t size() const { return ids.size(); }
};

// Projects each record's referenced audio vector through the model. Every
// record needs an audio_vec_ref whose row is in range of audio_vectors.
EmbeddingIndex build_index(const RetrievalModel& model,
                           const std::vector<SegmentRecord>& records,
                           const VectorStore& audio_vectors);

struct ScoredId {
    std::string id;
    double score = 0.0;  // cosine, in [-1, 1]
};

// Exact top-k by cosine similarity against the projected description vector;
// equals a full sort truncated to k. Ties break by index row order.
std::vector<ScoredId> retrieve_topk(const EmbeddingIndex& index, const RetrievalModel& model,
                                    std::span<const float> description_vec, size_t k);

struct TemplateEntry {
    std::string label;
    std::string phrase;
    std::vector<float> text_vec;  // frozen text-encoder output for the phrase
};

struct TemplateSet {
    std::vector<TemplateEntry> entries;  // needs >= 2 for classification
};

// Nearest template phrase in the shared embedding space; ties break by
// template order.
std::string zero_shot_classify(const RetrievalModel& model,
                               std::span<const double> audio_embedding,
                               const TemplateSet& templates);

struct GenderQuery {
    std::vector<float> description_vec;
    GenderLabel gender = GenderLabel::not_indicated;  // must be male or female
};

// Per query, the fraction of the top-k whose record gender matches; averaged
// per class and then across the two classes (macro average).
double gender_accuracy_at_k(const EmbeddingIndex& index, const RetrievalModel& model,
                            const std::vector<GenderQuery>& queries, size_t k = 10);

// Fraction correct per distinct true label.
std::map<std::string, double> classification_accuracy(const std::vector<std::string>& predictions,
                                                      const std::vector<std::string>& labels);

// Reference zero-shot accuracies measured on the full-scale corpus with
// frozen pretrained encoders. Context for comparing real-corpus runs only;
// desk-scale fixtures cannot reproduce them and no test asserts them.
struct ReferenceZeroShotAccuracy {
    const char* label;
    double alpha;
    double accuracy;
};

inline constexpr ReferenceZeroShotAccuracy kReferenceZeroShotAccuracies[] = {
    {"male", 0.0, 0.998}, {"female", 0.0, 0.941}, {"male", 1.0, 0.986}, {"female", 1.0, 1.000},
    {"fast", 0.0, 0.984}, {"slow", 0.0, 0.997},   {"fast", 1.0, 0.990}, {"slow", 1.0, 1.000},
};

}  // namespace vcs
