#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vcs/vector_store.hpp"

namespace vcs {

enum class GenderLabel { male, female, nonbinary, not_indicated };

const char* to_string(GenderLabel g);
std::optional<GenderLabel> gender_from_string(const std::string& s);

// Reference into a named VectorStore: (store id, row index).
struct VecRef {
    std::string store;
    uint32_t row = 0;
    bool operator==(const VecRef&) const = default;
};

// One speech segment of the corpus. External model outputs (NISQA MOS, MLM
// score, transcription, encoder vectors, x-vectors) arrive as fields or store
// references; this module never computes them.
struct SegmentRecord {
    std::string id;
    std::string channel_id;
    double duration_s = 0.0;
    std::optional<double> volume_dbfs;
    std::optional<double> nisqa_mos;  // [1, 5] when present
    std::optional<double> mlm_score;
    std::string transcription;
    std::optional<std::string> description;
    std::optional<int64_t> mora_count;  // >= 0 when present
    std::optional<GenderLabel> gender_label;
    std::optional<VecRef> audio_vec_ref;
    std::optional<VecRef> text_vec_ref;
    std::optional<VecRef> xvector_ref;
    std::optional<std::string> wav_ref;
    // Columns written by `features extract`.
    std::optional<double> f0_mean_hz;
    std::optional<double> energy_std;
    std::optional<double> speaking_rate;

    bool operator==(const SegmentRecord&) const = default;
};

// Channel-disjoint partition of segment ids.
struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> valid;
    std::vector<std::string> test;
};

// Line-delimited JSON, one record per line, UTF-8. Rejects duplicate ids and
// schema violations with the offending line number.
std::vector<SegmentRecord> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::vector<SegmentRecord>& records, const std::filesystem::path& path);

std::string record_to_line(const SegmentRecord& record);
SegmentRecord record_from_line(const std::string& line, size_t line_no);

DatasetSplit load_split(const std::filesystem::path& path);
void save_split(const DatasetSplit& split, const std::filesystem::path& path);

// Every vec_ref must name a known store and a row within range.
void validate_refs(const std::vector<SegmentRecord>& records,
                   const std::map<std::string, const VectorStore*>& stores);

// Splits must be pairwise disjoint, drawn from the manifest, and
// channel-disjoint.
void validate_split(const DatasetSplit& split, const std::vector<SegmentRecord>& records);

}  // namespace vcs
