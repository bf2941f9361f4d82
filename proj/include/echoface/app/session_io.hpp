#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "echoface/fmcw/chirp.hpp"
#include "echoface/fmcw/waveform.hpp"
#include "echoface/model/dataset.hpp"
#include "echoface/sim/session.hpp"

namespace echoface::app {

/// Output path exists and overwriting was not requested.
class OutputExists : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Chirp profiles selectable by name: "16-20" (default) and "20-24".
fmcw::ChirpSpec chirp_profile(const std::string& name);
std::string chirp_profile_name(const fmcw::ChirpSpec& c);

struct SessionInfo {
  std::string id;
  std::string participant;
  fmcw::ChirpSpec chirp;
  double gt_rate = sim::kGroundTruthRate;
  /// Clap instants on the ground-truth clock, in seconds.
  std::vector<double> clap_times_s;
  std::uint64_t seed = 0;
  double mount_offset_m = 0.0;
  int bit_depth = 8;
};

void to_json(nlohmann::json& j, const SessionInfo& s);
void from_json(const nlohmann::json& j, SessionInfo& s);

/// A session directory holds:
///   signal.eewv       received samples (8-bit by default)
///   blendshapes.csv   ground truth at gt_rate
///   blinks.csv        simulated blink instants (onset_s,duration_s,peak)
///   session.json      SessionInfo
struct RecordedSession {
  SessionInfo info;
  fmcw::Recording signal;
  sim::Trajectory ground_truth;
  std::vector<sim::BlinkTruth> blinks;
};

/// Refuses to write into a non-empty directory unless `force` is set.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

void write_session(const std::filesystem::path& dir, const sim::SimulatedSession& s, const SessionInfo& info,
                   bool force = false);
RecordedSession read_session(const std::filesystem::path& dir);

/// Clap detection, alignment and the DSP pipeline. Paths ending in .eeds are
/// loaded as already processed session data.
model::SessionData load_session_data(const std::filesystem::path& path, std::size_t guard_frames = 6);
model::SessionData process_session(const RecordedSession& s, std::size_t guard_frames = 6);

}  // namespace echoface::app
