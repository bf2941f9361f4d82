#include "echoface/model/synthetic.hpp"

#include "echoface/common/error.hpp"
#include "echoface/wire/clap.hpp"
#include "echoface/wire/quantize.hpp"

namespace echoface::model {

SessionData synthetic_session_data(const sim::SimulatedSession& session, const fmcw::ChirpSpec& chirp,
                                   std::string session_id, std::string participant, const SyntheticOptions& opts) {
  if (session.clap_times_s.empty()) throw DataError("simulated session '" + session_id + "' has no clap");
  fmcw::Recording signal = opts.quantize_8bit ? wire::requantize(session.signal) : session.signal;
  const auto clap = wire::detect_clap(signal);
  if (!clap) throw DataError("no clap found in simulated session '" + session_id + "'");
  wire::AlignOptions ao;
  ao.frame_len = chirp.n_samples;
  ao.guard_frames = opts.guard_frames;
  const double gt_pos = wire::row_position(session.clap_times_s.front(), session.ground_truth.frame_rate);
  const auto aligned = wire::align(signal, session.ground_truth, *clap, gt_pos, ao);
  return assemble_dataset(aligned, fmcw::PipelineConfig::for_chirp(chirp), std::move(session_id),
                          std::move(participant));
}

SessionData synthetic_session_data(const sim::SessionSpec& spec, std::string session_id, std::string participant,
                                   const SyntheticOptions& opts) {
  return synthetic_session_data(sim::simulate_session(spec), spec.chirp, std::move(session_id),
                                std::move(participant), opts);
}

sim::SessionSpec closed_loop_spec(std::uint64_t seed, const fmcw::ChirpSpec& chirp) {
  sim::SessionSpec spec;
  spec.chirp = chirp;
  spec.seed = seed;
  spec.trajectory.timing = sim::Timing::closed_loop();
  spec.trajectory.frame_rate = chirp.frame_rate();
  spec.trajectory.seed = seed;
  return spec;
}

}  // namespace echoface::model
