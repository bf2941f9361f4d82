#include "echoface/sim/session.hpp"

#include "echoface/common/error.hpp"
#include "echoface/sim/noise.hpp"
#include "echoface/sim/render.hpp"

namespace echoface::sim {

SimulatedSession simulate_session(const SessionSpec& spec) {
  spec.chirp.validate();
  spec.scene.validate();
  TrajectorySpec ts = spec.trajectory;
  ts.frame_rate = spec.chirp.frame_rate();
  auto synth = synth_trajectory_ex(ts);

  SimulatedSession s;
  s.truth = std::move(synth.trajectory);
  s.blinks = std::move(synth.blinks);
  const auto chirp = fmcw::generate_chirp(spec.chirp);
  s.signal = render_received(spec.scene, s.truth, chirp);
  std::uint64_t clap_seed = spec.seed * 0x9E3779B97F4A7C15ULL + 1;
  for (double t : spec.scene.clap_times) {
    s.signal = inject_clap(s.signal, t, clap_seed++);
    s.clap_times_s.push_back(t);
  }
  if (spec.scene.noise.enabled()) s.signal = inject_noise(s.signal, spec.scene.noise, spec.seed);
  s.ground_truth = resample(s.truth, spec.gt_rate);
  return s;
}

}  // namespace echoface::sim
