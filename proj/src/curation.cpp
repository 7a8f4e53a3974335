#include "vcs/curation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "vcs/error.hpp"
#include "vcs/rng.hpp"

namespace vcs {

namespace {

std::string ascii_lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
    }
    return out;
}

}  // namespace

std::pair<std::vector<SegmentRecord>, FilterReport> apply_quality_filters(
    const std::vector<SegmentRecord>& records, const FilterThresholds& t) {
    if (!(t.min_duration_s < t.max_duration_s))
        throw Error::validation("filter thresholds: min_duration_s must be < max_duration_s");

    FilterReport report;
    report.input = records.size();
    for (const char* r : kRejectReasons) report.rejected[r] = 0;

    std::vector<SegmentRecord> kept;
    for (const auto& rec : records) {
        const char* reason = nullptr;
        if (!rec.volume_dbfs || !rec.nisqa_mos || !rec.mlm_score) {
            reason = "missing-field";
        } else if (rec.duration_s < t.min_duration_s || rec.duration_s > t.max_duration_s) {
            reason = "duration";
        } else if (!(*rec.volume_dbfs > t.min_volume_dbfs)) {
            reason = "volume";
        } else if (!(*rec.nisqa_mos >= t.min_nisqa_mos)) {
            reason = "nisqa";
        } else if (!(*rec.mlm_score < t.max_mlm_score)) {
            reason = "mlm";
        }
        if (reason) {
            ++report.rejected[reason];
        } else {
            kept.push_back(rec);
        }
    }
    report.kept = kept.size();
    return {std::move(kept), std::move(report)};
}

KeywordSet default_voice_keywords() {
    KeywordSet k;
    k.keywords = {"声", "ボイス", "ヴォイス", "響", "音", "聴", "聞", "歌"};
    k.min_matching_comments = 10;
    return k;
}

std::vector<std::string> keyword_comment_filter(const std::vector<VideoComments>& videos,
                                                const KeywordSet& k) {
    if (k.keywords.empty()) throw Error::validation("keyword set must be non-empty");
    std::vector<std::string> kept;
    for (const auto& video : videos) {
        int matching = 0;
        for (const auto& comment : video.comments) {
            for (const auto& kw : k.keywords) {
                if (!kw.empty() && comment.find(kw) != std::string::npos) {
                    ++matching;
                    break;
                }
            }
        }
        if (matching >= k.min_matching_comments) kept.push_back(video.video_id);
    }
    return kept;
}

std::pair<std::vector<SegmentRecord>, std::vector<SegmentRecord>> nsfw_filter(
    const std::vector<SegmentRecord>& records, const std::vector<std::string>& wordlist) {
    std::vector<std::string> lowered;
    lowered.reserve(wordlist.size());
    for (const auto& w : wordlist) {
        if (!w.empty()) lowered.push_back(ascii_lower(w));
    }
    std::vector<SegmentRecord> kept, rejected;
    for (const auto& rec : records) {
        const std::string text = ascii_lower(rec.transcription);
        bool bad = false;
        for (const auto& w : lowered) {
            if (text.find(w) != std::string::npos) {
                bad = true;
                break;
            }
        }
        (bad ? rejected : kept).push_back(rec);
    }
    return {std::move(kept), std::move(rejected)};
}

GenderLabel label_gender_from_description(const std::string& description,
                                          const GenderMarkers& markers) {
    auto contains_any = [&](const std::vector<std::string>& set) {
        for (const auto& m : set) {
            if (!m.empty() && description.find(m) != std::string::npos) return true;
        }
        return false;
    };
    const bool male = contains_any(markers.male);
    const bool female = contains_any(markers.female);
    if (male && female) return GenderLabel::nonbinary;
    if (male) return GenderLabel::male;
    if (female) return GenderLabel::female;
    return GenderLabel::not_indicated;
}

DatasetSplit split_by_channel(const std::vector<SegmentRecord>& records,
                              const std::array<double, 3>& fractions, uint64_t seed) {
    for (const double f : fractions) {
        if (!(f > 0.0)) throw Error::validation("split fractions must be positive");
    }
    const double sum = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error::validation("split fractions must sum to 1");

    // Channels in first-appearance order; segment ids stay in manifest order.
    std::vector<std::string> channels;
    std::map<std::string, std::vector<std::string>> members;
    for (const auto& r : records) {
        auto [it, inserted] = members.try_emplace(r.channel_id);
        if (inserted) channels.push_back(r.channel_id);
        it->second.push_back(r.id);
    }
    if (channels.size() < 3)
        throw Error::validation("split needs at least 3 channels, have " +
                                std::to_string(channels.size()));

    Rng rng(seed);
    rng.shuffle(channels);

    const double total = double(records.size());
    const std::array<double, 3> target = {fractions[0] * total, fractions[1] * total,
                                          fractions[2] * total};
    std::array<double, 3> current = {0.0, 0.0, 0.0};
    DatasetSplit split;
    std::vector<std::string>* parts[3] = {&split.train, &split.valid, &split.test};
    for (const auto& ch : channels) {
        int best = 0;
        double best_ratio = current[0] / target[0];
        for (int i = 1; i < 3; ++i) {
            const double ratio = current[i] / target[i];
            if (ratio < best_ratio) {
                best_ratio = ratio;
                best = i;
            }
        }
        const auto& ids = members[ch];
        current[best] += double(ids.size());
        parts[best]->insert(parts[best]->end(), ids.begin(), ids.end());
    }
    return split;
}

std::vector<std::string> select_representatives(
    const std::vector<std::pair<std::string, int>>& assignment, uint64_t seed) {
    if (assignment.empty()) throw Error::validation("empty cluster assignment");
    std::map<int, std::vector<std::string>> clusters;
    for (const auto& [id, cluster] : assignment) clusters[cluster].push_back(id);

    Rng rng(seed);
    std::vector<std::string> reps;
    reps.reserve(clusters.size());
    for (const auto& [_, ids] : clusters) reps.push_back(ids[rng.index(ids.size())]);
    return reps;
}

}  // namespace vcs
