#pragma once

#include <array>
#include <optional>
#include <vector>

#include "vcs/audio.hpp"
#include "vcs/manifest.hpp"

namespace vcs {

// The 3-dimensional quantitative feature vector: utterance-level F0 mean,
// utterance-level standard deviation of energy, and speaking rate in moras
// per second.
struct SpeechFeatures {
    double f0_mean_hz = 0.0;
    double energy_std = 0.0;
    double speaking_rate = 0.0;

    std::array<double, 3> as_array() const { return {f0_mean_hz, energy_std, speaking_rate}; }
};

// z-score statistics fit on the training split; persisted in checkpoints so
// feature predictions stay in one consistent space.
struct FeatureNormalizer {
    std::array<double, 3> mean{};
    std::array<double, 3> std{};  // each component > 0
};

// Analysis framing shared by the pitch and energy extractors.
inline constexpr double kFrameSeconds = 0.025;
inline constexpr double kHopSeconds = 0.010;
inline constexpr double kPitchMinHz = 50.0;
inline constexpr double kPitchMaxHz = 500.0;
inline constexpr double kVoicingThreshold = 0.3;

struct PitchFrame {
    double f0_hz = 0.0;  // meaningful only when voiced
    double peak = 0.0;   // normalized autocorrelation peak in the search band
    bool voiced = false;
};

// Per-frame normalized-autocorrelation pitch over 25 ms frames with a 10 ms
// hop, candidate band 50-500 Hz, voicing decided at peak >= 0.3.
// Requires at least 100 ms of audio.
std::vector<PitchFrame> pitch_frames(const Waveform& w);

double voiced_fraction(const std::vector<PitchFrame>& frames);

// Mean F0 over voiced frames; absent when no frame is voiced.
std::optional<double> extract_f0_mean(const Waveform& w);

// Population standard deviation of per-frame RMS (linear scale). Requires at
// least 50 ms of audio.
double extract_energy_std(const Waveform& w);

// mora_count / duration_s, exactly.
double compute_speaking_rate(int64_t mora_count, double duration_s);

// Composes the three extractors. Fails on unvoiced audio or a missing
// mora_count; also rejects a record/waveform duration mismatch beyond 5%.
SpeechFeatures extract_features(const SegmentRecord& record, const Waveform& w);

// Per-dimension mean and population std over the training set. Needs >= 2
// samples and nonzero variance in every dimension.
FeatureNormalizer fit_normalizer(const std::vector<SpeechFeatures>& features);

std::array<double, 3> normalize(const FeatureNormalizer& n, const SpeechFeatures& f);
SpeechFeatures denormalize(const FeatureNormalizer& n, const std::array<double, 3>& v);

}  // namespace vcs
