#include "echoface/app/session_io.hpp"

#include <fstream>
#include <iomanip>

#include "echoface/common/error.hpp"
#include "echoface/face/blendshape.hpp"
#include "echoface/fmcw/waveform_io.hpp"
#include "echoface/wire/align.hpp"
#include "echoface/wire/clap.hpp"

namespace echoface::app {

namespace fs = std::filesystem;

fmcw::ChirpSpec chirp_profile(const std::string& name) {
  if (name == "16-20" || name == "standard") return fmcw::ChirpSpec::standard();
  if (name == "20-24" || name == "high") return fmcw::ChirpSpec::high_band();
  throw ConfigError("unknown chirp profile '" + name + "' (expected 16-20 or 20-24)");
}

std::string chirp_profile_name(const fmcw::ChirpSpec& c) {
  if (c.f_lo == 16000.0 && c.f_hi == 20000.0) return "16-20";
  if (c.f_lo == 20000.0 && c.f_hi == 24000.0) return "20-24";
  return "custom";
}

void to_json(nlohmann::json& j, const SessionInfo& s) {
  j = {{"id", s.id},
       {"participant", s.participant},
       {"chirp",
        {{"f_lo", s.chirp.f_lo},
         {"f_hi", s.chirp.f_hi},
         {"fs", s.chirp.fs},
         {"n_samples", s.chirp.n_samples},
         {"amplitude", s.chirp.amplitude}}},
       {"gt_rate", s.gt_rate},
       {"clap_times_s", s.clap_times_s},
       {"seed", s.seed},
       {"mount_offset_m", s.mount_offset_m},
       {"bit_depth", s.bit_depth}};
}

void from_json(const nlohmann::json& j, SessionInfo& s) {
  s.id = j.value("id", std::string{});
  s.participant = j.value("participant", std::string{});
  if (j.contains("chirp")) {
    const auto& c = j.at("chirp");
    s.chirp.f_lo = c.value("f_lo", s.chirp.f_lo);
    s.chirp.f_hi = c.value("f_hi", s.chirp.f_hi);
    s.chirp.fs = c.value("fs", s.chirp.fs);
    s.chirp.n_samples = c.value("n_samples", s.chirp.n_samples);
    s.chirp.amplitude = c.value("amplitude", s.chirp.amplitude);
  }
  s.chirp.validate();
  s.gt_rate = j.value("gt_rate", s.gt_rate);
  s.clap_times_s = j.value("clap_times_s", std::vector<double>{});
  s.seed = j.value("seed", std::uint64_t{0});
  s.mount_offset_m = j.value("mount_offset_m", 0.0);
  s.bit_depth = j.value("bit_depth", 8);
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw OutputExists(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !force)
      throw OutputExists(dir.string() + " is not empty; pass --force to overwrite");
  } else {
    fs::create_directories(dir);
  }
}

void write_session(const fs::path& dir, const sim::SimulatedSession& s, const SessionInfo& info, bool force) {
  prepare_output_dir(dir, force);
  fmcw::write_recording(dir / "signal.eewv", s.signal, info.bit_depth);
  face::write_blendshape_csv(dir / "blendshapes.csv",
                             face::make_table(s.ground_truth.frames, s.ground_truth.frame_rate));
  std::ofstream b(dir / "blinks.csv");
  b << "onset_s,duration_s,peak\n" << std::setprecision(17);
  for (const auto& e : s.blinks) b << e.onset_s << ',' << e.duration_s << ',' << e.peak << '\n';
  if (!b) throw DataError("cannot write " + (dir / "blinks.csv").string());
  std::ofstream j(dir / "session.json");
  j << nlohmann::json(info).dump(2) << '\n';
  if (!j) throw DataError("cannot write " + (dir / "session.json").string());
}

RecordedSession read_session(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a session directory");
  RecordedSession r;
  std::ifstream j(dir / "session.json");
  if (!j) throw DataError("missing " + (dir / "session.json").string());
  try {
    r.info = nlohmann::json::parse(j).get<SessionInfo>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad session.json in " + dir.string() + ": " + e.what());
  }
  r.signal = fmcw::read_recording(dir / "signal.eewv");
  const auto table = face::read_blendshape_csv(dir / "blendshapes.csv");
  r.ground_truth.frames = table.values;
  r.ground_truth.frame_rate = r.info.gt_rate;
  std::ifstream b(dir / "blinks.csv");
  std::string line;
  if (b && std::getline(b, line)) {
    while (std::getline(b, line)) {
      if (line.empty()) continue;
      sim::BlinkTruth t;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t.onset_s, &t.duration_s, &t.peak) != 3)
        throw DataError("bad line in blinks.csv: " + line);
      r.blinks.push_back(t);
    }
  }
  if (r.signal.fs != r.info.chirp.fs) throw DataError("signal sample rate disagrees with session.json");
  return r;
}

model::SessionData process_session(const RecordedSession& s, std::size_t guard_frames) {
  if (s.info.clap_times_s.empty()) throw DataError("session '" + s.info.id + "' has no ground-truth clap");
  const auto clap = wire::detect_clap(s.signal);
  if (!clap) throw DataError("no clap found in session '" + s.info.id + "'");
  wire::AlignOptions ao;
  ao.frame_len = s.info.chirp.n_samples;
  ao.guard_frames = guard_frames;
  const auto aligned = wire::align(s.signal, s.ground_truth, *clap,
                                   wire::row_position(s.info.clap_times_s.front(), s.ground_truth.frame_rate), ao);
  return model::assemble_dataset(aligned, fmcw::PipelineConfig::for_chirp(s.info.chirp), s.info.id,
                                 s.info.participant);
}

model::SessionData load_session_data(const fs::path& path, std::size_t guard_frames) {
  if (path.extension() == ".eeds") return model::load_session_data(path.string());
  return process_session(read_session(path), guard_frames);
}

}  // namespace echoface::app
