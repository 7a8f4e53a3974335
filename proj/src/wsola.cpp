#include "vcs/wsola.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "vcs/error.hpp"

namespace vcs {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kWindowSeconds = 0.030;
constexpr double kSearchSeconds = 0.0075;
constexpr double kMinRate = 0.5;
constexpr double kMaxRate = 2.0;

double ncc(const double* a, const double* b, size_t n) {
    double num = 0.0, ea = 0.0, eb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        num += a[i] * b[i];
        ea += a[i] * a[i];
        eb += b[i] * b[i];
    }
    const double denom = std::sqrt(ea * eb);
    return denom > 0.0 ? num / denom : 0.0;
}

}  // namespace

Waveform time_stretch_wsola(const Waveform& w, double rate) {
    validate_waveform(w, "wsola input");
    if (!(rate >= kMinRate && rate <= kMaxRate))
        throw Error::validation("stretch rate out of range [0.5, 2.0]: " + std::to_string(rate));

    const size_t n = w.samples.size();
    size_t win_len = static_cast<size_t>(std::lround(kWindowSeconds * w.sample_rate_hz));
    win_len += win_len & 1;  // even, for an exact 50% hop
    const size_t hop_syn = win_len / 2;
    const size_t tol = static_cast<size_t>(std::lround(kSearchSeconds * w.sample_rate_hz));
    if (win_len < 4 || hop_syn == 0)
        throw Error::validation("sample rate too low for a 30 ms analysis window");
    if (n < 3 * win_len)
        throw Error::validation("input too short for time stretching (need >= 3 windows)");

    std::vector<double> window(win_len);
    for (size_t i = 0; i < win_len; ++i)
        window[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * double(i) / double(win_len)));

    const double hop_ana = double(hop_syn) * rate;
    const size_t max_pos = n - win_len;

    // Frame count chosen so the output lands on the target length n/rate to
    // within half a synthesis hop.
    const double target_len = double(n) / rate;
    const long frames = std::max<long>(2, std::lround((target_len - double(win_len)) / double(hop_syn)) + 1);

    const size_t out_len = size_t(frames - 1) * hop_syn + win_len;
    std::vector<double> acc(out_len, 0.0);
    std::vector<double> wsum(out_len, 0.0);

    auto add_segment = [&](size_t src, size_t dst) {
        for (size_t i = 0; i < win_len; ++i) {
            acc[dst + i] += window[i] * w.samples[src + i];
            wsum[dst + i] += window[i];
        }
    };

    size_t prev_pos = 0;
    add_segment(0, 0);
    for (long k = 1; k < frames; ++k) {
        const long nominal = std::lround(double(k) * hop_ana);
        const size_t lo = size_t(std::clamp<long>(nominal - long(tol), 0, long(max_pos)));
        const size_t hi = size_t(std::clamp<long>(nominal + long(tol), 0, long(max_pos)));
        const size_t ref = std::min(prev_pos + hop_syn, max_pos);  // natural continuation

        size_t best_pos = lo;
        double best_score = -2.0;
        for (size_t p = lo; p <= hi; ++p) {
            const double s = ncc(w.samples.data() + p, w.samples.data() + ref, win_len);
            if (s > best_score) {
                best_score = s;
                best_pos = p;
            }
        }
        add_segment(best_pos, size_t(k) * hop_syn);
        prev_pos = best_pos;
    }

    Waveform out;
    out.sample_rate_hz = w.sample_rate_hz;
    out.samples.resize(out_len);
    for (size_t i = 0; i < out_len; ++i)
        out.samples[i] = wsum[i] > 1e-9 ? acc[i] / wsum[i] : 0.0;
    return out;
}

}  // namespace vcs
