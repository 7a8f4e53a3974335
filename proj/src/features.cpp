#include "vcs/features.hpp"

#include <algorithm>
#include <cmath>

#include "vcs/error.hpp"

namespace vcs {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Framing {
    size_t frame_len = 0;
    size_t hop = 0;
    size_t num_frames = 0;
};

Framing make_framing(const Waveform& w) {
    Framing fr;
    fr.frame_len = static_cast<size_t>(std::lround(kFrameSeconds * w.sample_rate_hz));
    fr.hop = static_cast<size_t>(std::lround(kHopSeconds * w.sample_rate_hz));
    if (fr.frame_len == 0 || fr.hop == 0)
        throw Error::validation("sample rate too low for 25 ms / 10 ms framing");
    if (w.samples.size() >= fr.frame_len)
        fr.num_frames = 1 + (w.samples.size() - fr.frame_len) / fr.hop;
    return fr;
}

// Periodic Hann weights; also used by the energy extractor so that frame
// boundaries do not leak a phase-dependent ripple into the statistics.
std::vector<double> hann_weights(size_t n) {
    std::vector<double> w(n);
    for (size_t i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * double(i) / double(n)));
    return w;
}

}  // namespace

std::vector<PitchFrame> pitch_frames(const Waveform& w) {
    validate_waveform(w, "pitch input");
    if (w.duration_s() < 0.1 - 1e-12)
        throw Error::validation("waveform too short for pitch analysis (need >= 100 ms)");
    const Framing fr = make_framing(w);

    const size_t lag_min = std::max<size_t>(2, static_cast<size_t>(std::ceil(w.sample_rate_hz / kPitchMaxHz)));
    size_t lag_max = static_cast<size_t>(std::floor(w.sample_rate_hz / kPitchMinHz));
    lag_max = std::min(lag_max, fr.frame_len - 2);
    if (lag_min >= lag_max) throw Error::validation("sample rate too low for the 50-500 Hz search band");

    std::vector<PitchFrame> out(fr.num_frames);
    std::vector<double> frame(fr.frame_len);
    std::vector<double> corr(lag_max + 1, 0.0);

    for (size_t f = 0; f < fr.num_frames; ++f) {
        const double* x = w.samples.data() + f * fr.hop;
        double mean = 0.0;
        for (size_t i = 0; i < fr.frame_len; ++i) mean += x[i];
        mean /= double(fr.frame_len);
        double energy = 0.0;
        for (size_t i = 0; i < fr.frame_len; ++i) {
            frame[i] = x[i] - mean;
            energy += frame[i] * frame[i];
        }
        PitchFrame& pf = out[f];
        if (energy < 1e-12) continue;  // silent frame, unvoiced

        // Normalized autocorrelation over the candidate lag band.
        double best = -2.0;
        size_t best_lag = 0;
        for (size_t lag = lag_min; lag <= lag_max; ++lag) {
            const size_t n = fr.frame_len - lag;
            double num = 0.0, e0 = 0.0, e1 = 0.0;
            for (size_t i = 0; i < n; ++i) {
                num += frame[i] * frame[i + lag];
                e0 += frame[i] * frame[i];
                e1 += frame[i + lag] * frame[i + lag];
            }
            const double denom = std::sqrt(e0 * e1);
            const double r = denom > 0.0 ? num / denom : 0.0;
            corr[lag] = r;
            if (r > best) {
                best = r;
                best_lag = lag;
            }
        }
        if (best_lag == 0) continue;

        // Prefer the shortest lag whose peak is close to the global maximum;
        // on periodic signals the autocorrelation is ~1 at every multiple of
        // the period and the smallest one is the fundamental.
        size_t lag = best_lag;
        for (size_t cand = lag_min + 1; cand < best_lag; ++cand) {
            if (corr[cand] >= 0.85 * best && corr[cand] >= corr[cand - 1] &&
                (cand + 1 > lag_max || corr[cand] >= corr[cand + 1])) {
                lag = cand;
                break;
            }
        }

        // Parabolic refinement around the integer peak.
        double refined = double(lag);
        if (lag > lag_min && lag < lag_max) {
            const double rm = corr[lag - 1], r0 = corr[lag], rp = corr[lag + 1];
            const double denom = rm - 2.0 * r0 + rp;
            if (std::abs(denom) > 1e-12) {
                double delta = 0.5 * (rm - rp) / denom;
                delta = std::clamp(delta, -1.0, 1.0);
                refined += delta;
            }
        }

        pf.peak = corr[lag];
        if (pf.peak >= kVoicingThreshold) {
            pf.voiced = true;
            pf.f0_hz = double(w.sample_rate_hz) / refined;
        }
    }
    return out;
}

double voiced_fraction(const std::vector<PitchFrame>& frames) {
    if (frames.empty()) return 0.0;
    size_t v = 0;
    for (const auto& f : frames) v += f.voiced ? 1 : 0;
    return double(v) / double(frames.size());
}

std::optional<double> extract_f0_mean(const Waveform& w) {
    const auto frames = pitch_frames(w);
    double sum = 0.0;
    size_t count = 0;
    for (const auto& f : frames) {
        if (f.voiced) {
            sum += f.f0_hz;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / double(count);
}

double extract_energy_std(const Waveform& w) {
    validate_waveform(w, "energy input");
    if (w.duration_s() < 0.05 - 1e-12)
        throw Error::validation("waveform too short for energy analysis (need >= 50 ms)");
    const Framing fr = make_framing(w);
    if (fr.num_frames == 0)
        throw Error::validation("waveform too short for energy analysis (need >= 50 ms)");

    const std::vector<double> win = hann_weights(fr.frame_len);
    double wsum = 0.0;
    for (const double v : win) wsum += v;

    std::vector<double> rms(fr.num_frames);
    for (size_t f = 0; f < fr.num_frames; ++f) {
        const double* x = w.samples.data() + f * fr.hop;
        double acc = 0.0;
        for (size_t i = 0; i < fr.frame_len; ++i) acc += win[i] * x[i] * x[i];
        rms[f] = std::sqrt(acc / wsum);
    }
    double mean = 0.0;
    for (const double v : rms) mean += v;
    mean /= double(fr.num_frames);
    double var = 0.0;
    for (const double v : rms) var += (v - mean) * (v - mean);
    var /= double(fr.num_frames);
    return std::sqrt(var);
}

double compute_speaking_rate(int64_t mora_count, double duration_s) {
    if (mora_count < 0) throw Error::validation("mora_count must be >= 0");
    if (!(duration_s > 0.0)) throw Error::validation("duration must be positive");
    return double(mora_count) / duration_s;
}

SpeechFeatures extract_features(const SegmentRecord& record, const Waveform& w) {
    if (!record.mora_count)
        throw Error::validation("record " + record.id + ": missing mora_count");
    const double wav_dur = w.duration_s();
    if (std::abs(wav_dur - record.duration_s) > 0.05 * record.duration_s)
        throw Error::validation("record " + record.id + ": waveform duration " +
                                std::to_string(wav_dur) + " inconsistent with manifest duration " +
                                std::to_string(record.duration_s));
    const auto f0 = extract_f0_mean(w);
    if (!f0) throw Error::validation("record " + record.id + ": unvoiced segment, no F0");
    SpeechFeatures feats;
    feats.f0_mean_hz = *f0;
    feats.energy_std = extract_energy_std(w);
    feats.speaking_rate = compute_speaking_rate(*record.mora_count, record.duration_s);
    return feats;
}

FeatureNormalizer fit_normalizer(const std::vector<SpeechFeatures>& features) {
    if (features.size() < 2)
        throw Error::validation("normalizer needs at least 2 feature vectors");
    FeatureNormalizer n;
    for (const auto& f : features) {
        const auto a = f.as_array();
        for (int d = 0; d < 3; ++d) n.mean[d] += a[d];
    }
    for (int d = 0; d < 3; ++d) n.mean[d] /= double(features.size());
    for (const auto& f : features) {
        const auto a = f.as_array();
        for (int d = 0; d < 3; ++d) n.std[d] += (a[d] - n.mean[d]) * (a[d] - n.mean[d]);
    }
    static const char* kDimNames[3] = {"f0_mean_hz", "energy_std", "speaking_rate"};
    for (int d = 0; d < 3; ++d) {
        n.std[d] = std::sqrt(n.std[d] / double(features.size()));
        if (!(n.std[d] > 0.0))
            throw Error::validation(std::string("degenerate feature dimension (zero variance): ") +
                                    kDimNames[d]);
    }
    return n;
}

std::array<double, 3> normalize(const FeatureNormalizer& n, const SpeechFeatures& f) {
    const auto a = f.as_array();
    return {(a[0] - n.mean[0]) / n.std[0], (a[1] - n.mean[1]) / n.std[1],
            (a[2] - n.mean[2]) / n.std[2]};
}

SpeechFeatures denormalize(const FeatureNormalizer& n, const std::array<double, 3>& v) {
    SpeechFeatures f;
    f.f0_mean_hz = v[0] * n.std[0] + n.mean[0];
    f.energy_std = v[1] * n.std[1] + n.mean[1];
    f.speaking_rate = v[2] * n.std[2] + n.mean[2];
    return f;
}

}  // namespace vcs
