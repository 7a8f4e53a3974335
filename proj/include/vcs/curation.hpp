#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vcs/manifest.hpp"

namespace vcs {

// Quality-filter thresholds. Keep rules: min_duration_s <= duration_s <=
// max_duration_s, volume_dbfs > min_volume_dbfs, nisqa_mos >= min_nisqa_mos,
// mlm_score < max_mlm_score.
struct FilterThresholds {
    double min_duration_s = 2.0;
    double max_duration_s = 10.0;
    double min_volume_dbfs = -55.0;
    double min_nisqa_mos = 2.0;
    double max_mlm_score = -0.01;
};

// A record failing several rules is counted once, under the first failing
// rule in the order below.
inline constexpr const char* kRejectReasons[] = {"missing-field", "duration", "volume", "nisqa",
                                                 "mlm"};

struct FilterReport {
    size_t input = 0;
    size_t kept = 0;
    std::map<std::string, size_t> rejected;  // reason -> count

    size_t rejected_total() const {
        size_t t = 0;
        for (const auto& [_, c] : rejected) t += c;
        return t;
    }
};

std::pair<std::vector<SegmentRecord>, FilterReport> apply_quality_filters(
    const std::vector<SegmentRecord>& records, const FilterThresholds& t);

struct KeywordSet {
    std::vector<std::string> keywords;
    int min_matching_comments = 10;
};

// The eight published voice-related pre-filter keywords.
KeywordSet default_voice_keywords();

struct VideoComments {
    std::string video_id;
    std::vector<std::string> comments;
};

// Keeps videos with at least min_matching_comments comments that contain any
// keyword as a substring (a comment matching several keywords counts once).
std::vector<std::string> keyword_comment_filter(const std::vector<VideoComments>& videos,
                                                const KeywordSet& k);

// Rejects records whose transcription contains a wordlist entry as a
// substring; ASCII letters compare case-insensitively.
std::pair<std::vector<SegmentRecord>, std::vector<SegmentRecord>> nsfw_filter(
    const std::vector<SegmentRecord>& records, const std::vector<std::string>& wordlist);

struct GenderMarkers {
    std::vector<std::string> male{"男"};
    std::vector<std::string> female{"女"};
};

// Presence of a male marker only -> male; female only -> female; both ->
// nonbinary; neither -> not_indicated. Total over all strings.
GenderLabel label_gender_from_description(const std::string& description,
                                          const GenderMarkers& markers = GenderMarkers{});

// Shuffles channels with the seed, then greedily assigns each whole channel
// to the split with the lowest current/target segment-count ratio. The result
// is channel-disjoint by construction. Fractions must be positive and sum
// to 1; needs at least 3 channels.
DatasetSplit split_by_channel(const std::vector<SegmentRecord>& records,
                              const std::array<double, 3>& fractions, uint64_t seed);

// One uniformly chosen member id per cluster, in ascending cluster order.
// Deterministic per seed.
std::vector<std::string> select_representatives(
    const std::vector<std::pair<std::string, int>>& assignment, uint64_t seed);

}  // namespace vcs
