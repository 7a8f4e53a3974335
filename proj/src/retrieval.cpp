#include "vcs/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vcs/error.hpp"

namespace vcs {

EmbeddingIndex build_index(const RetrievalModel& model,
                           const std::vector<SegmentRecord>& records,
                           const VectorStore& audio_vectors) {
    EmbeddingIndex index;
    index.ids.reserve(records.size());
    index.records = records;
    index.vectors = Mat(records.size(), size_t(model.config.embed_dim));
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (!rec.audio_vec_ref)
            throw Error::validation("record " + rec.id + ": missing audio_vec_ref");
        if (rec.audio_vec_ref->row >= audio_vectors.count())
            throw Error::validation("record " + rec.id + ": audio_vec_ref row out of range");
        const auto embedding =
            project(model, Modality::audio, audio_vectors.row(rec.audio_vec_ref->row));
        std::copy(embedding.begin(), embedding.end(), index.vectors.row(i).begin());
        if (!index.row_of.emplace(rec.id, i).second)
            throw Error::validation("duplicate id in index: " + rec.id);
        index.ids.push_back(rec.id);
    }
    return index;
}

std::vector<ScoredId> retrieve_topk(const EmbeddingIndex& index, const RetrievalModel& model,
                                    std::span<const float> description_vec, size_t k) {
    if (k == 0) throw Error::validation("retrieve_topk: k must be >= 1");
    if (index.size() == 0) throw Error::validation("retrieve_topk: empty index");
    const auto query = project(model, Modality::text, description_vec);

    std::vector<std::pair<double, size_t>> scored(index.size());
    for (size_t i = 0; i < index.size(); ++i) {
        double dot = 0.0;
        const auto row = index.vectors.row(i);
        for (size_t c = 0; c < row.size(); ++c) dot += row[c] * query[c];
        scored[i] = {dot, i};
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;  // tie: index row (id) order
    });

    const size_t take = std::min(k, scored.size());
    std::vector<ScoredId> out;
    out.reserve(take);
    for (size_t i = 0; i < take; ++i)
        out.push_back({index.ids[scored[i].second], scored[i].first});
    return out;
}

std::string zero_shot_classify(const RetrievalModel& model,
                               std::span<const double> audio_embedding,
                               const TemplateSet& templates) {
    if (templates.entries.size() < 2)
        throw Error::validation("zero-shot classification needs at least 2 template phrases");
    if (audio_embedding.size() != size_t(model.config.embed_dim))
        throw Error::validation("zero_shot_classify: embedding dimension mismatch");

    double best = -2.0;
    size_t best_idx = 0;
    for (size_t i = 0; i < templates.entries.size(); ++i) {
        const auto tvec = project(model, Modality::text, templates.entries[i].text_vec);
        double dot = 0.0;
        for (size_t c = 0; c < tvec.size(); ++c) dot += tvec[c] * audio_embedding[c];
        if (dot > best) {  // strict: ties keep the earlier template
            best = dot;
            best_idx = i;
        }
    }
    return templates.entries[best_idx].label;
}

double gender_accuracy_at_k(const EmbeddingIndex& index, const RetrievalModel& model,
                            const std::vector<GenderQuery>& queries, size_t k) {
    if (k == 0) throw Error::validation("gender_accuracy_at_k: k must be >= 1");
    if (index.size() == 0) throw Error::validation("gender_accuracy_at_k: empty index");
    for (const auto& rec : index.records) {
        if (!rec.gender_label)
            throw Error::validation("gender_accuracy_at_k: index record " + rec.id +
                                    " has no gender label");
    }

    double sum[2] = {0.0, 0.0};
    size_t count[2] = {0, 0};
    for (const auto& q : queries) {
        int cls;
        if (q.gender == GenderLabel::male) {
            cls = 0;
        } else if (q.gender == GenderLabel::female) {
            cls = 1;
        } else {
            throw Error::validation("gender_accuracy_at_k: queries must be male or female");
        }
        const auto top = retrieve_topk(index, model, q.description_vec, k);
        size_t matches = 0;
        for (const auto& hit : top) {
            const auto& rec = index.records[index.row_of.at(hit.id)];
            if (rec.gender_label == q.gender) ++matches;
        }
        sum[cls] += double(matches) / double(top.size());
        ++count[cls];
    }
    if (count[0] == 0 || count[1] == 0)
        throw Error::validation(
            "gender_accuracy_at_k: macro average undefined, a class has zero queries");
    return 0.5 * (sum[0] / double(count[0]) + sum[1] / double(count[1]));
}

std::map<std::string, double> classification_accuracy(const std::vector<std::string>& predictions,
                                                      const std::vector<std::string>& labels) {
    if (predictions.size() != labels.size())
        throw Error::validation("classification_accuracy: length mismatch");
    std::map<std::string, std::pair<size_t, size_t>> counts;  // label -> (correct, total)
    for (size_t i = 0; i < labels.size(); ++i) {
        auto& [correct, total] = counts[labels[i]];
        ++total;
        if (predictions[i] == labels[i]) ++correct;
    }
    std::map<std::string, double> out;
    for (const auto& [label, ct] : counts) out[label] = double(ct.first) / double(ct.second);
    return out;
}

}  // namespace vcs
