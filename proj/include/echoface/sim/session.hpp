#pragma once

#include <cstdint>
#include <vector>

#include "echoface/fmcw/chirp.hpp"
#include "echoface/fmcw/waveform.hpp"
#include "echoface/sim/scene.hpp"
#include "echoface/sim/trajectory.hpp"

namespace echoface::sim {

inline constexpr double kGroundTruthRate = 30.0;

struct SessionSpec {
  Scene scene = default_scene();
  TrajectorySpec trajectory;
  fmcw::ChirpSpec chirp;
  double gt_rate = kGroundTruthRate;
  std::uint64_t seed = 1;  // noise and clap; the trajectory carries its own seed
};

struct SimulatedSession {
  fmcw::Recording signal;
  Trajectory truth;         // at the chirp frame rate
  Trajectory ground_truth;  // at gt_rate, same clock origin as the signal
  std::vector<BlinkTruth> blinks;
  std::vector<double> clap_times_s;
};

/// Renders the scene, injects claps and then noise.
SimulatedSession simulate_session(const SessionSpec& spec);

}  // namespace echoface::sim
