#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "echoface/fmcw/chirp.hpp"
#include "echoface/fmcw/waveform.hpp"
#include "echoface/sim/scene.hpp"
#include "echoface/sim/trajectory.hpp"

namespace echoface::sim {

/// Longest one-way distance whose round trip fits in one chirp period.
double unambiguous_range(const fmcw::ChirpSpec& chirp, double speed_of_sound = fmcw::kSpeedOfSound);

/// Noiseless two-channel received signal. The chirp repeats endlessly; each
/// echo is the chirp delayed by the reflector's round trip, with fractional
/// delays by linear interpolation. Reflector distances are interpolated per
/// sample between frame-centre knots of `traj`. The recording has
/// traj.n_frames() whole frames.
fmcw::Recording render_received(const Scene& scene, const Trajectory& traj, const fmcw::Waveform& chirp,
                                double speed_of_sound = fmcw::kSpeedOfSound);

/// Renders only the listed reflectors (clutter and noise ignored).
fmcw::Recording render_reflectors(std::span<const Reflector> reflectors, const Trajectory& traj,
                                  const fmcw::Waveform& chirp, double received_gain = 0.15,
                                  bool inverse_square = false, double speed_of_sound = fmcw::kSpeedOfSound);

}  // namespace echoface::sim
