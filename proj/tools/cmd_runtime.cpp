#include <fstream>
#include <iostream>

#include "cli.hpp"
#include "echoface/app/bench.hpp"
#include "echoface/app/session_io.hpp"
#include "echoface/app/stream.hpp"
#include "echoface/common/error.hpp"
#include "echoface/model/synthetic.hpp"
#include "echoface/model/train.hpp"
#include "echoface/sim/session.hpp"
#include "echoface/wire/align.hpp"
#include "echoface/wire/clap.hpp"

namespace echoface::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json stats_json(const app::LatencyStats& s) {
  return {{"n", s.n}, {"mean_ms", s.mean}, {"p50_ms", s.p50}, {"p95_ms", s.p95}, {"p99_ms", s.p99}, {"max_ms", s.max}};
}

/// The session's signal cut at the first chirp boundary after the clap, so
/// stream frame k is the same frame the offline dataset calls k.
fmcw::Recording session_signal(const app::RecordedSession& s, bool align_to_clap) {
  if (!align_to_clap) return s.signal;
  const auto clap = wire::detect_clap(s.signal);
  if (!clap || s.info.clap_times_s.empty()) throw DataError("no clap found; pass --no-align to stream the raw signal");
  wire::AlignOptions ao;
  ao.frame_len = s.info.chirp.n_samples;
  ao.guard_frames = 6;
  return wire::align(s.signal, s.ground_truth, *clap,
                     wire::row_position(s.info.clap_times_s.front(), s.ground_truth.frame_rate), ao)
      .signal;
}

}  // namespace

void register_runtime_commands(CLI::App& app, Runner& run) {
  // stream
  {
    struct Opts {
      std::string session, model, out;
      app::StreamConfig sc;
      bool compare = false, no_align = false, force = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("stream", "Replay a session over loopback TCP through the threaded runtime");
    cmd->add_option("--session", o->session, "Session directory")->required();
    cmd->add_option("--model", o->model, "Model file (omit to run capture and DSP only)");
    cmd->add_option("--out", o->out, "Predictions CSV")->required();
    cmd->add_flag("--realtime", o->sc.realtime, "Pace the sender at the sample rate");
    cmd->add_option("--predict-every", o->sc.predict_every, "Predict on every n-th frame")->capture_default_str();
    cmd->add_option("--samples-per-packet", o->sc.samples_per_packet, "Frames per packet")->capture_default_str();
    cmd->add_option("--packet-queue", o->sc.packet_queue, "Packet queue capacity")->capture_default_str();
    cmd->add_option("--link-loss", o->sc.link_loss, "Fraction of packets the sender drops")->capture_default_str();
    cmd->add_option("--seed", o->sc.seed, "Seed for link loss")->capture_default_str();
    cmd->add_flag("--compare", o->compare, "Check the predictions bit for bit against offline processing");
    cmd->add_flag("--no-align", o->no_align, "Stream the raw recording instead of cutting at the clap");
    cmd->add_flag("--force", o->force, "Overwrite an existing file");
    cmd->callback([&run, o] {
      run = [o](Context& c) {
        check_overwrite(o->out, o->force);
        o->sc.validate();
        if (o->compare && o->model.empty()) throw ConfigError("--compare needs --model");
        const auto s = app::read_session(o->session);
        const auto signal = session_signal(s, !o->no_align);
        const auto cfg = fmcw::PipelineConfig::for_chirp(s.info.chirp);
        std::optional<model::Model> m;
        if (!o->model.empty()) m = model::load_model(o->model);

        const auto r = app::run_loopback(signal, cfg, m ? &*m : nullptr, o->sc);
        if (m) write_predictions_csv(o->out, r.predictions, r.frames, cfg.chirp.frame_rate());
        else std::ofstream(o->out) << "no model: capture and DSP only\n";

        const auto dsp = app::latency_stats(r.dsp_ms);
        const auto inf = app::latency_stats(r.inference_ms);
        c.manifest.command = "stream";
        c.manifest.seed = o->sc.seed;
        c.manifest.config = {{"session", o->session},
                             {"model", o->model},
                             {"realtime", o->sc.realtime},
                             {"predict_every", o->sc.predict_every},
                             {"samples_per_packet", o->sc.samples_per_packet},
                             {"packet_queue", o->sc.packet_queue},
                             {"column_queue", o->sc.column_queue},
                             {"link_loss", o->sc.link_loss},
                             {"aligned", !o->no_align}};
        c.manifest.outputs = {o->out};
        c.manifest.results = {{"frames", r.frames_processed},
                              {"invalid_frames", r.invalid_frames},
                              {"predictions", r.frames.size()},
                              {"packets_sent", r.packets_sent},
                              {"packets_parsed", r.packets_parsed},
                              {"packets_dropped", r.packets_dropped},
                              {"lost_samples", r.loss.lost},
                              {"wall_s", r.wall_s},
                              {"frames_per_s", r.frame_rate()},
                              {"predictions_per_s", r.prediction_rate()},
                              {"dsp", stats_json(dsp)},
                              {"inference", stats_json(inf)}};
        std::cout << r.frames_processed << " frames, " << r.frames.size() << " predictions in " << r.wall_s
                  << " s (" << r.frame_rate() << " frames/s, " << r.prediction_rate() << " predictions/s)\n"
                  << "dsp p50/p99 " << dsp.p50 << "/" << dsp.p99 << " ms, inference p50/p99 " << inf.p50 << "/"
                  << inf.p99 << " ms, " << r.packets_dropped << " packets dropped, " << r.invalid_frames
                  << " invalid frames\n";

        bool identical = true;
        if (o->compare) {
          const auto off = app::offline_predictions(signal, cfg, *m, o->sc.predict_every);
          identical = off.frames == r.frames && off.predictions.rows() == r.predictions.rows() &&
                      (off.predictions.array() == r.predictions.array()).all();
          double diff = 0.0;
          if (off.predictions.rows() == r.predictions.rows() && r.predictions.size() > 0)
            diff = (off.predictions - r.predictions).cwiseAbs().maxCoeff();
          c.manifest.results["compare"] = {{"identical", identical}, {"max_abs_diff", diff},
                                           {"offline_predictions", off.frames.size()}};
          std::cout << (identical ? "stream matches offline bit for bit\n"
                                  : "stream differs from offline (max |diff| " + std::to_string(diff) + ")\n");
        }
        c.manifest.write(app::manifest_path_for(o->out));
        if (!identical) throw ExitRequest(kExitData, "");
      };
    });
  }

  // bench
  {
    struct Opts {
      std::string session, ridge, conv, out;
      app::BenchBudget budget;
      std::size_t windows = 2000;
      double sim_seconds = 60.0;
      std::uint64_t seed = 1;
      bool force = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("bench", "Time DSP, inference and the loopback stream against the frame budget");
    cmd->add_option("--session", o->session, "Session directory (default: simulate one)");
    cmd->add_option("--model", o->ridge, "Ridge model (default: train one on the session)");
    cmd->add_option("--conv", o->conv, "Conv model to time as well");
    cmd->add_option("--out", o->out, "Report JSON")->required();
    cmd->add_option("--windows", o->windows, "Inference timing windows")->capture_default_str();
    cmd->add_option("--sim-seconds", o->sim_seconds, "Length of the simulated session")->capture_default_str();
    cmd->add_option("--seed", o->seed, "Seed of the simulated session")->capture_default_str();
    cmd->add_option("--min-fps", o->budget.dsp_frames_per_s, "DSP throughput budget")->capture_default_str();
    cmd->add_option("--dsp-p99-ms", o->budget.dsp_p99_ms, "DSP per-frame p99 budget")->capture_default_str();
    cmd->add_option("--ridge-p99-ms", o->budget.ridge_p99_ms, "Ridge inference p99 budget")->capture_default_str();
    cmd->add_option("--min-predictions-per-s", o->budget.stream_predictions_per_s, "Stream prediction rate budget")
        ->capture_default_str();
    cmd->add_flag("--force", o->force, "Overwrite an existing file");
    cmd->callback([&run, o] {
      run = [o](Context& c) {
        check_overwrite(o->out, o->force);
        fmcw::Recording signal;
        fmcw::ChirpSpec chirp;
        std::optional<model::SessionData> data;
        if (!o->session.empty()) {
          const auto s = app::read_session(o->session);
          chirp = s.info.chirp;
          signal = session_signal(s, true);
          if (o->ridge.empty()) data = app::process_session(s);
        } else {
          auto spec = model::closed_loop_spec(o->seed, chirp);
          spec.trajectory.duration_s = o->sim_seconds;
          const auto sim = sim::simulate_session(spec);
          signal = sim.signal;
          if (o->ridge.empty()) data = model::synthetic_session_data(sim, chirp, "bench");
        }
        model::Model ridge;
        if (!o->ridge.empty()) ridge = model::load_model(o->ridge);
        else {
          const model::SessionData* one[] = {&*data};
          ridge = model::train_ridge(one, model::ModelConfig{});
        }
        std::optional<model::Model> conv;
        if (!o->conv.empty()) conv = model::load_model(o->conv);

        app::BenchOptions bo;
        bo.inference_windows = o->windows;
        const auto cfg = fmcw::PipelineConfig::for_chirp(chirp);
        const auto r = app::run_bench(signal, cfg, ridge, conv ? &*conv : nullptr, o->budget, bo);
        app::write_bench_text(std::cout, r, o->budget);
        std::ofstream(o->out) << r.to_json().dump(2) << '\n';

        c.manifest.command = "bench";
        c.manifest.seed = o->seed;
        c.manifest.config = {{"session", o->session.empty() ? json("simulated") : json(o->session)},
                             {"sim_seconds", o->sim_seconds},
                             {"model", o->ridge},
                             {"conv", o->conv},
                             {"windows", o->windows},
                             {"budget",
                              {{"dsp_frames_per_s", o->budget.dsp_frames_per_s},
                               {"dsp_p99_ms", o->budget.dsp_p99_ms},
                               {"ridge_p99_ms", o->budget.ridge_p99_ms},
                               {"stream_predictions_per_s", o->budget.stream_predictions_per_s}}}};
        c.manifest.outputs = {o->out};
        c.manifest.results = r.to_json();
        c.manifest.write(app::manifest_path_for(o->out));
        if (!r.ok()) throw ExitRequest(kExitBudget, "budget missed");
      };
    });
  }
}

}  // namespace echoface::cli
