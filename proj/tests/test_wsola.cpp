#include <doctest.h>

#include <cmath>

#include "testing_util.hpp"
#include "vcs/error.hpp"
#include "vcs/features.hpp"
#include "vcs/wsola.hpp"

using namespace vcs;
using testutil::make_sine;

namespace {

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = std::min(a.size(), b.size());
    double num = 0.0, ea = 0.0, eb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        num += a[i] * b[i];
        ea += a[i] * a[i];
        eb += b[i] * b[i];
    }
    return num / std::sqrt(ea * eb);
}

size_t synthesis_hop(int sample_rate) {
    size_t win = size_t(std::lround(0.030 * sample_rate));
    win += win & 1;
    return win / 2;
}

}  // namespace

TEST_CASE("wsola: rate 1.0 is near identity") {
    const auto in = make_sine(220.0, 1.0);
    const auto out = time_stretch_wsola(in, 1.0);
    const auto hop = synthesis_hop(in.sample_rate_hz);
    CHECK(std::abs(double(out.samples.size()) - double(in.samples.size())) <= double(hop));
    CHECK(correlation(out.samples, in.samples) > 0.95);
}

TEST_CASE("wsola: rate 1.5 shortens by 1/1.5 and preserves pitch") {
    const auto in = make_sine(220.0, 1.0);
    const auto out = time_stretch_wsola(in, 1.5);
    const auto hop = synthesis_hop(in.sample_rate_hz);
    const double target = double(in.samples.size()) / 1.5;
    CHECK(std::abs(double(out.samples.size()) - target) <= double(hop));

    const auto f0 = extract_f0_mean(out);
    REQUIRE(f0.has_value());
    CHECK(std::abs(*f0 - 220.0) / 220.0 < 0.03);
}

TEST_CASE("wsola: length ratio within one hop across the valid rate range") {
    const auto in = make_sine(150.0, 0.8);
    const auto hop = synthesis_hop(in.sample_rate_hz);
    for (const double rate : {0.5, 0.7, 1.0, 1.3, 1.7, 2.0}) {
        const auto out = time_stretch_wsola(in, rate);
        const double target = double(in.samples.size()) / rate;
        CHECK(std::abs(double(out.samples.size()) - target) <= double(hop));
    }
}

TEST_CASE("wsola: out-of-range rate rejected") {
    const auto in = make_sine(220.0, 0.5);
    CHECK_THROWS_AS(time_stretch_wsola(in, 3.0), Error);
    CHECK_THROWS_AS(time_stretch_wsola(in, 0.25), Error);
}

TEST_CASE("wsola: too-short input rejected") {
    const auto in = make_sine(220.0, 0.05);  // < 3 windows of 30 ms
    CHECK_THROWS_AS(time_stretch_wsola(in, 1.5), Error);
}
