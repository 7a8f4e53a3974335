#pragma once

#include <filesystem>
#include <vector>

namespace vcs {

// Mono waveform, amplitudes nominally in [-1, 1].
struct Waveform {
    std::vector<double> samples;
    int sample_rate_hz = 0;

    double duration_s() const {
        return sample_rate_hz > 0 ? double(samples.size()) / sample_rate_hz : 0.0;
    }
};

// Throws Error(validation) on empty samples, non-positive rate, or non-finite
// values.
void validate_waveform(const Waveform& w, const std::string& what);

// Reads linear PCM WAV: 16-bit integer or 32-bit float, mono or stereo
// (stereo is averaged to mono). Anything else is rejected.
Waveform read_wav(const std::filesystem::path& path);

// Writes 32-bit float mono WAV.
void write_wav(const Waveform& w, const std::filesystem::path& path);

}  // namespace vcs
