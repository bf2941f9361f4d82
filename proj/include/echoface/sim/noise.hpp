#pragma once

#include <cstdint>

#include "echoface/fmcw/waveform.hpp"
#include "echoface/sim/scene.hpp"

namespace echoface::sim {

inline constexpr int kAudibleTones = 64;

/// Adds white and/or audible-band noise scaled against each channel's power.
/// The audible component is a sum of random tones in (20 Hz, f_max).
fmcw::Recording inject_noise(const fmcw::Recording& x, const NoiseSpec& spec, std::uint64_t seed);

/// 10 ms full-band burst at `at_s` with amplitude 5x the RMS of the
/// preceding 0.5 s (the following 0.5 s when nothing precedes).
fmcw::Recording inject_clap(const fmcw::Recording& x, double at_s, std::uint64_t seed = 7,
                            double amplitude_factor = 5.0, double duration_s = 0.01);

double rms(std::span<const double> x);

}  // namespace echoface::sim
