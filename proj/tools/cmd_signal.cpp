#include <fstream>
#include <iomanip>
#include <iostream>

#include "cli.hpp"
#include "echoface/app/export.hpp"
#include "echoface/app/session_io.hpp"
#include "echoface/common/error.hpp"
#include "echoface/fmcw/pipeline.hpp"
#include "echoface/fmcw/waveform_io.hpp"
#include "echoface/sim/scene.hpp"
#include "echoface/sim/session.hpp"
#include "echoface/wire/align.hpp"
#include "echoface/wire/clap.hpp"
#include "echoface/wire/quantize.hpp"

namespace echoface::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json pipeline_constants(const fmcw::ChirpSpec& c) {
  const auto cfg = fmcw::PipelineConfig::for_chirp(c);
  return {{"profile", app::chirp_profile_name(c)},
          {"f_lo_hz", c.f_lo},
          {"f_hi_hz", c.f_hi},
          {"fs_hz", c.fs},
          {"chirp_samples", c.n_samples},
          {"frame_duration_s", c.frame_duration()},
          {"frame_rate_hz", c.frame_rate()},
          {"bin_pitch_m", fmcw::bin_to_distance(1, c.fs)},
          {"truncated_bins", cfg.window.n_bins},
          {"truncation_range_m", fmcw::truncation_range(cfg.window.n_bins, c.fs)},
          {"window_rows", cfg.window.rows()},
          {"window_frames", cfg.window.n_frames},
          {"wire_bitrate_bps", wire::nominal_bitrate(c.fs, static_cast<int>(cfg.window.n_channels), 8)}};
}

std::vector<sim::Preset> parse_presets(const std::vector<std::string>& names) {
  if (names.empty() || (names.size() == 1 && names[0] == "all")) return sim::all_presets();
  std::vector<sim::Preset> p;
  for (const auto& n : names) p.push_back(sim::parse_preset(n));
  return p;
}

}  // namespace

void register_signal_commands(CLI::App& app, Runner& run) {
  // chirp
  {
    auto* cmd = app.add_subcommand("chirp", "Write one chirp period and the pipeline constants");
    auto profile = std::make_shared<std::string>("16-20");
    auto out = std::make_shared<std::string>();
    auto force = std::make_shared<bool>(false);
    cmd->add_option("--profile", *profile, "Chirp band: 16-20 or 20-24")->capture_default_str();
    cmd->add_option("--out", *out, "CSV of index,time_s,value,inst_freq_hz")->required();
    cmd->add_flag("--force", *force, "Overwrite existing outputs");
    cmd->callback([&run, profile, out, force] {
      run = [profile, out, force](Context& c) {
        const auto spec = app::chirp_profile(*profile);
        check_overwrite(*out, *force);
        const auto w = fmcw::generate_chirp(spec);
        std::ofstream os(*out);
        os << "index,time_s,value,inst_freq_hz\n" << std::setprecision(12);
        for (std::size_t i = 0; i < w.size(); ++i)
          os << i << ',' << static_cast<double>(i) / spec.fs << ',' << w.samples[i] << ','
             << fmcw::chirp_instantaneous_frequency(spec, static_cast<double>(i)) << '\n';
        if (!os) throw DataError("cannot write " + *out);
        const auto constants = pipeline_constants(spec);
        std::cout << constants.dump(2) << '\n';
        c.manifest.command = "chirp";
        c.manifest.config = {{"profile", *profile}};
        c.manifest.outputs = {*out};
        c.manifest.results = constants;
        c.manifest.write(app::manifest_path_for(*out));
      };
    });
  }

  // simulate
  {
    struct Opts {
      std::string out, profile = "16-20", scene, trajectory, timing = "lab", id, participant = "p0";
      std::vector<std::string> presets;
      std::uint64_t seed = 1;
      double duration = 120.0, mount_offset_mm = 0.0;
      int repetitions = 6, bit_depth = 8;
      std::optional<int> blinks;
      std::optional<double> white_snr, audible_snr;
      bool no_blinks = false, force = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("simulate", "Render a synthetic session to a session directory");
    cmd->add_option("--out", o->out, "Session directory")->required();
    cmd->add_option("--seed", o->seed, "Seed for trajectory, noise and clap")->capture_default_str();
    cmd->add_option("--profile", o->profile, "Chirp band: 16-20 or 20-24")->capture_default_str();
    cmd->add_option("--duration", o->duration, "Seconds")->capture_default_str();
    cmd->add_option("--presets", o->presets, "Expression presets, or 'all'");
    cmd->add_option("--repetitions", o->repetitions, "Repetitions of each preset")->capture_default_str();
    cmd->add_option("--timing", o->timing, "lab or closed-loop")->capture_default_str();
    cmd->add_option("--blinks", o->blinks, "Exact number of blinks (default: random rate)");
    cmd->add_flag("--no-blinks", o->no_blinks, "Disable spontaneous blinks");
    cmd->add_option("--mount-offset-mm", o->mount_offset_mm, "Shift every face reflector (remount)")
        ->capture_default_str();
    cmd->add_option("--scene", o->scene, "Scene JSON (default: built-in linear scene)");
    cmd->add_option("--trajectory", o->trajectory, "Trajectory settings JSON; overrides the trajectory flags");
    cmd->add_option("--white-snr-db", o->white_snr, "Add white noise at this SNR");
    cmd->add_option("--audible-snr-db", o->audible_snr, "Add <=5 kHz band noise at this SNR");
    cmd->add_option("--bit-depth", o->bit_depth, "Sample file depth: 8 or 64")->capture_default_str();
    cmd->add_option("--id", o->id, "Session id (default: directory name)");
    cmd->add_option("--participant", o->participant, "Participant label")->capture_default_str();
    cmd->add_flag("--force", o->force, "Overwrite a non-empty directory");
    cmd->callback([&run, o] {
      run = [o](Context& c) {
        sim::SessionSpec spec;
        spec.chirp = app::chirp_profile(o->profile);
        spec.seed = o->seed;
        spec.scene = o->scene.empty() ? sim::default_scene() : sim::load_scene(o->scene);
        if (o->white_snr) spec.scene.noise.white_snr_db = *o->white_snr;
        if (o->audible_snr) spec.scene.noise.audible_band = sim::AudibleBand{5000.0, *o->audible_snr};
        if (o->mount_offset_mm != 0.0) spec.scene = sim::shifted_scene(spec.scene, o->mount_offset_mm / 1000.0);
        if (!o->trajectory.empty()) {
          std::ifstream is(o->trajectory);
          if (!is) throw DataError("cannot read " + o->trajectory);
          spec.trajectory = json::parse(is).get<sim::TrajectorySpec>();
        } else {
          spec.trajectory.presets = parse_presets(o->presets);
          spec.trajectory.repetitions = o->repetitions;
          spec.trajectory.duration_s = o->duration;
          spec.trajectory.seed = o->seed;
          if (o->timing == "lab") spec.trajectory.timing = sim::Timing::lab();
          else if (o->timing == "closed-loop") spec.trajectory.timing = sim::Timing::closed_loop();
          else throw ConfigError("unknown timing '" + o->timing + "' (expected lab or closed-loop)");
          spec.trajectory.blinks.enabled = !o->no_blinks;
          if (o->blinks) spec.trajectory.blinks.exact_count = *o->blinks;
        }
        spec.trajectory.frame_rate = spec.chirp.frame_rate();
        if (o->bit_depth != 8 && o->bit_depth != 64) throw ConfigError("--bit-depth must be 8 or 64");
        app::prepare_output_dir(o->out, o->force);

        const auto session = sim::simulate_session(spec);
        app::SessionInfo info;
        info.id = o->id.empty() ? fs::path(o->out).filename().string() : o->id;
        info.participant = o->participant;
        info.chirp = spec.chirp;
        info.gt_rate = spec.gt_rate;
        info.clap_times_s = session.clap_times_s;
        info.seed = o->seed;
        info.mount_offset_m = o->mount_offset_mm / 1000.0;
        info.bit_depth = o->bit_depth;
        app::write_session(o->out, session, info, true);

        c.manifest.command = "simulate";
        c.manifest.seed = o->seed;
        c.manifest.config = {{"scene", spec.scene}, {"trajectory", spec.trajectory}, {"session", info}};
        c.manifest.outputs = {"signal.eewv", "blendshapes.csv", "blinks.csv", "session.json"};
        c.manifest.results = {{"samples", session.signal.n_samples()},
                              {"blinks", session.blinks.size()},
                              {"signal_bytes", fs::file_size(fs::path(o->out) / "signal.eewv")}};
        c.manifest.write(fs::path(o->out) / "manifest.json");
        std::cout << "wrote " << o->out << ": " << session.signal.duration() << " s, " << session.blinks.size()
                  << " blinks\n";
      };
    });
  }

  // process
  {
    struct Opts {
      std::string session, out;
      std::size_t heatmap_every = 1, snapshots = 5;
      std::vector<std::int64_t> dump_windows;
      bool no_align = false, force = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("process", "Run the DSP pipeline and write plot data and window dumps");
    cmd->add_option("--session", o->session, "Session directory")->required();
    cmd->add_option("--out", o->out, "Output directory")->required();
    cmd->add_option("--heatmap-every", o->heatmap_every, "Write every n-th frame to the heatmap")
        ->capture_default_str();
    cmd->add_option("--snapshots", o->snapshots, "Full echo profiles to write")->capture_default_str();
    cmd->add_option("--dump-window", o->dump_windows, "Frame indices whose 60x84 windows are written");
    cmd->add_flag("--no-align", o->no_align, "Process the whole recording without clap alignment");
    cmd->add_flag("--force", o->force, "Overwrite a non-empty directory");
    cmd->callback([&run, o] {
      run = [o](Context& c) {
        const auto s = app::read_session(o->session);
        app::prepare_output_dir(o->out, o->force);
        fmcw::Recording signal = s.signal;
        std::uint64_t offset = 0;
        if (!o->no_align) {
          const auto clap = wire::detect_clap(s.signal);
          if (!clap) throw DataError("no clap found in " + o->session);
          if (s.info.clap_times_s.empty()) throw DataError("session.json lists no clap");
          wire::AlignOptions ao;
          ao.frame_len = s.info.chirp.n_samples;
          ao.guard_frames = 6;
          const auto a = wire::align(s.signal, s.ground_truth, *clap,
                                     wire::row_position(s.info.clap_times_s.front(), s.ground_truth.frame_rate), ao);
          signal = a.signal;
          offset = a.offset;
        }
        const auto cfg = fmcw::PipelineConfig::for_chirp(s.info.chirp);
        app::PlotOptions po;
        po.heatmap_every = o->heatmap_every;
        po.profile_snapshots = o->snapshots;
        const auto p = app::process_with_plots(signal, cfg, o->out, po);
        json dumps = json::array();
        for (auto k : o->dump_windows) {
          if (k < static_cast<std::int64_t>(p.first_window_frame()) || k >= static_cast<std::int64_t>(p.n_frames()))
            throw ConfigError("--dump-window " + std::to_string(k) + " outside [" +
                              std::to_string(p.first_window_frame()) + ", " + std::to_string(p.n_frames()) + ")");
          fmcw::EchoWindow w;
          w.values = p.window_at(static_cast<std::size_t>(k));
          w.current_frame = k;
          const auto name = "window_" + std::to_string(k);
          fmcw::write_window_binary(fs::path(o->out) / (name + ".bin"), w);
          std::ofstream csv(fs::path(o->out) / (name + ".csv"));
          fmcw::write_window_csv(csv, w);
          dumps.push_back(name);
        }
        const double diff_energy = p.columns.squaredNorm();
        const double share = app::energy_share_within(fs::path(o->out) / "lag_energy.csv",
                                                      fmcw::truncation_range(cfg.window.n_bins, cfg.chirp.fs));
        c.manifest.command = "process";
        c.manifest.config = {{"session", o->session}, {"aligned", !o->no_align}, {"heatmap_every", o->heatmap_every}};
        c.manifest.outputs = {"lag_energy.csv", "diff_heatmap.csv", "profiles.csv"};
        for (auto& d : dumps) c.manifest.outputs.push_back(d);
        c.manifest.results = {{"frames", p.n_frames()},
                              {"offset_samples", offset},
                              {"truncated_diff_energy", diff_energy},
                              {"energy_share_within_truncation", share}};
        c.manifest.write(fs::path(o->out) / "manifest.json");
        std::cout << p.n_frames() << " frames; differential energy within "
                  << fmcw::truncation_range(cfg.window.n_bins, cfg.chirp.fs) * 100.0 << " cm: " << share * 100.0
                  << "%\n";
      };
    });
  }

  // dataset
  {
    struct Opts {
      std::vector<std::string> sessions;
      std::string out;
      bool npy = false, force = false;
      std::size_t guard = 6;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("dataset", "Align and process sessions into training data (.eeds, optional .npy)");
    cmd->add_option("--sessions", o->sessions, "Session directories")->required();
    cmd->add_option("--out", o->out, "Output directory")->required();
    cmd->add_flag("--npy", o->npy, "Also write columns.npy/gt.npy per session for external tools");
    cmd->add_option("--guard-frames", o->guard, "Frames skipped after the clap")->capture_default_str();
    cmd->add_flag("--force", o->force, "Overwrite a non-empty directory");
    cmd->callback([&run, o] {
      run = [o](Context& c) {
        app::prepare_output_dir(o->out, o->force);
        json list = json::array();
        for (const auto& path : o->sessions) {
          const auto s = app::load_session_data(path, o->guard);
          const auto file = fs::path(o->out) / (s.session_id + ".eeds");
          model::save_session_data(file.string(), s);
          if (o->npy) app::export_dataset_npy(fs::path(o->out) / s.session_id, s);
          list.push_back({{"id", s.session_id}, {"participant", s.participant}, {"frames", s.n_frames()},
                          {"windows", s.n_windows()}, {"file", file.filename().string()}});
          std::cout << s.session_id << ": " << s.n_frames() << " frames, " << s.n_windows() << " windows\n";
        }
        std::ofstream(fs::path(o->out) / "sessions.json") << list.dump(2) << '\n';
        c.manifest.command = "dataset";
        c.manifest.config = {{"sessions", o->sessions}, {"npy", o->npy}, {"guard_frames", o->guard}};
        c.manifest.outputs = list;
        c.manifest.write(fs::path(o->out) / "manifest.json");
      };
    });
  }
}

}  // namespace echoface::cli
