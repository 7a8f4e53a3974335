#pragma once

#include "vcs/audio.hpp"

namespace vcs {

// Waveform-similarity overlap-add time-scale modification. rate > 1 speeds
// speech up (shorter output), rate < 1 slows it down; pitch is preserved.
// 30 ms Hann windows at 50% synthesis overlap, candidate positions searched
// within +-7.5 ms of the nominal analysis point by normalized
// cross-correlation. Valid rates: [0.5, 2.0]; input must cover at least
// 3 analysis windows.
Waveform time_stretch_wsola(const Waveform& w, double rate);

}  // namespace vcs
