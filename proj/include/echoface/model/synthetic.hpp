#pragma once

#include <string>

#include "echoface/model/dataset.hpp"
#include "echoface/sim/session.hpp"
#include "echoface/wire/align.hpp"

namespace echoface::model {

struct SyntheticOptions {
  /// Frames dropped after the clap so the burst stays out of the windows.
  std::size_t guard_frames = 6;
  /// Pass the signal through the 8-bit transport quantizer first.
  bool quantize_8bit = false;
};

/// Full offline flow on a simulated session: clap detection on the signal,
/// alignment against the ground truth's clap time, then the DSP pipeline.
SessionData synthetic_session_data(const sim::SimulatedSession& session, const fmcw::ChirpSpec& chirp,
                                   std::string session_id, std::string participant = {},
                                   const SyntheticOptions& opts = {});
SessionData synthetic_session_data(const sim::SessionSpec& spec, std::string session_id,
                                   std::string participant = {}, const SyntheticOptions& opts = {});

/// Session settings used by the closed-loop experiments: the default scene,
/// closed-loop timing and a 2-minute trajectory seeded by `seed`.
sim::SessionSpec closed_loop_spec(std::uint64_t seed, const fmcw::ChirpSpec& chirp = {});

}  // namespace echoface::model
