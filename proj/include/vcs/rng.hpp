#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace vcs {

// Deterministic random source. Wraps std::mt19937_64 (whose output sequence is
// fixed by the standard) and implements all derived draws by hand, because the
// std::*_distribution classes are implementation-defined and would break
// byte-identical outputs across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, bound), bound >= 1. Rejection sampling on the top
    // of the range keeps the draw exactly uniform.
    uint64_t below(uint64_t bound) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % bound;
    }

    size_t index(size_t size) { return static_cast<size_t>(below(static_cast<uint64_t>(size))); }

    // Uniform double in [0, 1) with 53 random bits.
    double unit_real() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit_real(); }

    // Box-Muller; the spare value is cached so draws come in a fixed sequence.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = unit_real();
        while (u1 <= 0.0) u1 = unit_real();
        const double u2 = unit_real();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Fisher-Yates shuffle driven by below(); deterministic per seed.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace vcs
