#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "echoface/app/session_io.hpp"
#include "echoface/blink/detector.hpp"
#include "echoface/common/error.hpp"
#include "echoface/model/crossval.hpp"
#include "echoface/model/evaluate.hpp"

namespace echoface::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json report_json(const face::MetricReport& r) {
  json b = json::array();
  for (std::size_t i = 0; i < face::kNumBuckets; ++i)
    b.push_back({{"degree", face::kBucketLabels[i]},
                 {"frames", r.buckets[i].frames},
                 {"fraction", r.buckets[i].fraction},
                 {"mae", r.buckets[i].mae},
                 {"lmae", r.buckets[i].lmae},
                 {"umae", r.buckets[i].umae}});
  return {{"frames", r.frames}, {"mae", r.mae},   {"lmae", r.lmae}, {"umae", r.umae},
          {"pl40", r.pl40},     {"pu60", r.pu60}, {"buckets", b}};
}

json match_json(const blink::MatchResult& m) {
  return {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

bool models_blinks(const model::Model& m) {
  for (auto i : model::blink_outputs())
    if (std::find(m.config.outputs.begin(), m.config.outputs.end(), i) == m.config.outputs.end()) return false;
  return true;
}

/// Options shared by train and crossval.
struct ModelOpts {
  std::string kind = "ridge", target = "change", outputs = "all";
  double lambda = 1e-4;
  std::vector<int> shifts;
  bool blink_defaults = false;
  std::optional<int> epochs, batch;
  std::optional<double> lr, motion_scale;
  std::optional<std::size_t> stride, active_repeat;
  std::optional<int> vertical_shift;
  std::optional<bool> position_channel;
  std::uint64_t seed = 1;
  std::size_t guard = 6;

  void add(CLI::App* cmd) {
    cmd->add_option("--model", kind, "ridge or conv")->capture_default_str();
    cmd->add_option("--target", target, "change or absolute")->capture_default_str();
    cmd->add_option("--outputs", outputs, "all or blink")->capture_default_str();
    cmd->add_option("--lambda", lambda, "Ridge penalty, relative to the mean Gram diagonal")->capture_default_str();
    cmd->add_option("--shift-copies", shifts, "Ridge: extra copies shifted by these row offsets");
    cmd->add_flag("--blink-defaults", blink_defaults, "Conv: start from the blink model and training defaults");
    cmd->add_option("--epochs", epochs, "Conv epochs");
    cmd->add_option("--batch", batch, "Conv batch size");
    cmd->add_option("--lr", lr, "Conv learning rate");
    cmd->add_option("--window-stride", stride, "Conv: use every n-th training window");
    cmd->add_option("--vertical-shift", vertical_shift, "Conv: random row shift bound");
    cmd->add_option("--motion-scale", motion_scale, "Conv: motion-bank augmentation scale");
    cmd->add_option("--active-repeat", active_repeat, "Conv: visits per epoch of event windows");
    cmd->add_option("--position-channel", position_channel, "Conv: add the row-position input plane");
    cmd->add_option("--seed", seed, "Training seed")->capture_default_str();
    cmd->add_option("--guard-frames", guard, "Frames skipped after the clap")->capture_default_str();
  }

  model::ModelConfig model_config() const {
    model::ModelConfig c = blink_defaults ? blink::blink_model_config() : model::ModelConfig{};
    c.kind = model::parse_model_kind(kind);
    c.target = model::parse_target_mode(target);
    c.ridge.lambda = lambda;
    c.ridge.shifts = shifts;
    if (outputs == "blink") c.outputs = model::blink_outputs();
    else if (outputs == "all") { if (!blink_defaults) c.outputs = model::all_outputs(); }
    else throw ConfigError("--outputs must be all or blink");
    if (position_channel) c.conv.position_channel = *position_channel;
    c.validate();
    return c;
  }

  model::TrainConfig train_config() const {
    model::TrainConfig t = blink_defaults ? blink::blink_train_config() : model::TrainConfig{};
    if (epochs) t.epochs = *epochs;
    if (batch) t.batch_size = *batch;
    if (lr) t.learning_rate = *lr;
    if (stride) t.window_stride = *stride;
    if (vertical_shift) t.max_vertical_shift = *vertical_shift;
    if (motion_scale) t.motion_scale = *motion_scale;
    if (active_repeat) t.active_repeat = *active_repeat;
    t.seed = seed;
    t.validate();
    return t;
  }

  json to_json(const model::ModelConfig& mc, const model::TrainConfig& tc) const {
    json j = {{"model", mc}, {"guard_frames", guard}};
    if (mc.kind == model::ModelKind::kConv)
      j["train"] = {{"epochs", tc.epochs}, {"batch_size", tc.batch_size}, {"learning_rate", tc.learning_rate},
                    {"final_lr_fraction", tc.final_lr_fraction}, {"seed", tc.seed}, {"window_stride", tc.window_stride},
                    {"max_vertical_shift", tc.max_vertical_shift}, {"motion_scale", tc.motion_scale},
                    {"active_repeat", tc.active_repeat}, {"active_threshold", tc.active_threshold}};
    return j;
  }
};

void write_curve_csv(const fs::path& path, std::span<const model::EpochRecord> curve) {
  std::ofstream os(path);
  os << "epoch,loss,val_mae\n" << std::setprecision(9);
  for (const auto& e : curve) os << e.epoch << ',' << e.loss << ',' << e.val_mae << '\n';
  if (!os) throw DataError("cannot write " + path.string());
}

}  // namespace

void register_model_commands(CLI::App& app, Runner& run) {
  // train
  {
    struct Opts {
      ModelOpts m;
      std::vector<std::string> sessions, validation;
      std::string out;
      bool force = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("train", "Train a ridge or conv regressor");
    cmd->add_option("--sessions", o->sessions, "Training sessions (directories or .eeds)")->required();
    cmd->add_option("--val", o->validation, "Validation sessions (conv learning curve)");
    cmd->add_option("--out", o->out, "Model file")->required();
    cmd->add_flag("--force", o->force, "Overwrite an existing model");
    o->m.add(cmd);
    cmd->callback([&run, o] {
      run = [o](Context& c) {
        check_overwrite(o->out, o->force);
        const auto mc = o->m.model_config();
        const auto tc = o->m.train_config();
        const auto train = load_sessions(o->sessions, o->m.guard);
        const auto val = load_sessions(o->validation, o->m.guard);
        const auto tp = pointers(train), vp = pointers(val);
        c.manifest.command = "train";
        c.manifest.seed = o->m.seed;
        c.manifest.config = o->m.to_json(mc, tc);
        c.manifest.config["sessions"] = o->sessions;
        c.manifest.config["validation"] = o->validation;
        c.manifest.outputs = {o->out};

        model::Model m;
        if (mc.kind == model::ModelKind::kRidge) {
          m = model::train_ridge(tp, mc);
        } else {
          auto r = model::train_conv(tp, mc, tc, vp, nullptr, [](const model::EpochRecord& e) {
            std::cout << "epoch " << e.epoch << "  loss " << e.loss << "  val_mae " << e.val_mae << '\n';
          });
          const auto curve = fs::path(o->out).string() + ".curve.csv";
          write_curve_csv(curve, r.curve);
          c.manifest.outputs.push_back(curve);
          json jc = json::array();
          for (const auto& e : r.curve) jc.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"val_mae", e.val_mae}});
          c.manifest.results["curve"] = jc;
          m = std::move(r.model);
        }
        model::save_model(o->out, m);
        json train_mae = json::object();
        for (const auto& s : train) train_mae[s.session_id] = model::session_mae(m, s);
        c.manifest.results["train_mae"] = train_mae;
        c.manifest.write(app::manifest_path_for(o->out));
        std::cout << "wrote " << o->out << " (" << model::model_kind_name(mc.kind) << ", " << m.n_outputs()
                  << " outputs)\n";
      };
    });
  }

  // predict
  {
    struct Opts {
      std::string model, session, out;
      std::size_t guard = 6;
      bool force = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("predict", "Predict blendshapes for every window of a session");
    cmd->add_option("--model", o->model, "Model file")->required();
    cmd->add_option("--session", o->session, "Session directory or .eeds")->required();
    cmd->add_option("--out", o->out, "Predictions CSV")->required();
    cmd->add_option("--guard-frames", o->guard, "Frames skipped after the clap")->capture_default_str();
    cmd->add_flag("--force", o->force, "Overwrite an existing file");
    cmd->callback([&run, o] {
      run = [o](Context& c) {
        check_overwrite(o->out, o->force);
        const auto m = model::load_model(o->model);
        const auto s = app::load_session_data(o->session, o->guard);
        const auto p = model::predict_full(m, s);
        std::vector<std::int64_t> frames;
        for (Eigen::Index i = 0; i < p.pred.rows(); ++i)
          frames.push_back(static_cast<std::int64_t>(p.first_frame) + i);
        write_predictions_csv(o->out, p.pred, frames, s.frame_rate);
        c.manifest.command = "predict";
        c.manifest.config = {{"model", o->model}, {"session", o->session}, {"guard_frames", o->guard}};
        c.manifest.outputs = {o->out};
        c.manifest.results = {{"windows", static_cast<std::size_t>(p.pred.rows())}, {"first_frame", p.first_frame}};
        c.manifest.write(app::manifest_path_for(o->out));
        std::cout << "wrote " << p.pred.rows() << " predictions to " << o->out << '\n';
      };
    });
  }

  // eval
  {
    struct Opts {
      std::string model, out;
      std::vector<std::string> sessions;
      std::size_t guard = 6;
      double on = 250.0, off = 150.0, tolerance = 0.15;
      bool force = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("eval", "Score a model on held-out sessions");
    cmd->add_option("--model", o->model, "Model file")->required();
    cmd->add_option("--sessions", o->sessions, "Test sessions")->required();
    cmd->add_option("--out", o->out, "Report CSV (one row per session plus pooled)")->required();
    cmd->add_option("--guard-frames", o->guard, "Frames skipped after the clap")->capture_default_str();
    cmd->add_option("--blink-on", o->on, "Blink hysteresis upper threshold")->capture_default_str();
    cmd->add_option("--blink-off", o->off, "Blink hysteresis lower threshold")->capture_default_str();
    cmd->add_option("--blink-tolerance", o->tolerance, "Blink match tolerance in seconds")->capture_default_str();
    cmd->add_flag("--force", o->force, "Overwrite an existing file");
    cmd->callback([&run, o] {
      run = [o](Context& c) {
        check_overwrite(o->out, o->force);
        const auto m = model::load_model(o->model);
        const auto sessions = load_sessions(o->sessions, o->guard);
        std::vector<face::MetricReport> reports;
        std::vector<blink::MatchResult> matches;
        const bool blinks = models_blinks(m);
        blink::ExtractorConfig ec;
        ec.on_threshold = o->on;
        ec.off_threshold = o->off;

        std::ofstream csv(o->out);
        model::write_report_csv_header(csv);
        json per = json::object();
        for (const auto& s : sessions) {
          reports.push_back(model::evaluate_session(m, s));
          model::write_report_csv_row(csv, s.session_id, reports.back());
          per[s.session_id] = report_json(reports.back());
          if (blinks) {
            ec.frame_rate = s.frame_rate;
            matches.push_back(blink::evaluate_blinks(m, s, ec, o->tolerance));
            per[s.session_id]["blink"] = match_json(matches.back());
          }
        }
        const auto pooled = face::combine(reports);
        model::write_report_csv_row(csv, "pooled", pooled);
        if (!csv) throw DataError("cannot write " + o->out);

        write_report_text(std::cout, pooled);
        c.manifest.command = "eval";
        c.manifest.config = {{"model", o->model}, {"sessions", o->sessions}, {"guard_frames", o->guard},
                             {"blink", {{"on", o->on}, {"off", o->off}, {"tolerance_s", o->tolerance}}}};
        c.manifest.outputs = {o->out};
        c.manifest.results = {{"pooled", report_json(pooled)}, {"sessions", per}};
        if (blinks) {
          const auto all = blink::merge(matches);
          c.manifest.results["blink"] = match_json(all);
          std::cout << "blink F1 " << all.f1 << " (tp " << all.tp << ", fp " << all.fp << ", fn " << all.fn << ")\n";
        }
        c.manifest.write(app::manifest_path_for(o->out));
      };
    });
  }

  // crossval
  {
    struct Opts {
      ModelOpts m;
      std::vector<std::string> sessions;
      std::string scheme = "kfold", out;
      std::size_t folds = 6;
      bool shuffle = false, fine_tune = false, force = false;
      double fine_tune_seconds = 30.0;
      std::optional<double> fine_tune_lr;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("crossval", "Cross-validate over whole sessions");
    cmd->add_option("--sessions", o->sessions, "Sessions (directories or .eeds)")->required();
    cmd->add_option("--scheme", o->scheme, "kfold or lopo (leave one participant out)")->capture_default_str();
    cmd->add_option("--folds", o->folds, "Folds for kfold")->capture_default_str();
    cmd->add_flag("--shuffle", o->shuffle, "Shuffle session order before cutting folds");
    cmd->add_flag("--fine-tune", o->fine_tune, "Fine-tune each fold model on the head of every test session");
    cmd->add_option("--fine-tune-seconds", o->fine_tune_seconds, "Head length used for fine-tuning")
        ->capture_default_str();
    cmd->add_option("--fine-tune-lr", o->fine_tune_lr, "Conv fine-tuning learning rate (default lr / 10)");
    cmd->add_option("--out", o->out, "Per-fold CSV")->required();
    cmd->add_flag("--force", o->force, "Overwrite an existing file");
    o->m.add(cmd);
    cmd->callback([&run, o] {
      run = [o](Context& c) {
        check_overwrite(o->out, o->force);
        const auto mc = o->m.model_config();
        const auto tc = o->m.train_config();
        model::CrossvalScheme scheme;
        if (o->scheme == "kfold") scheme.kind = model::SchemeKind::kKFold;
        else if (o->scheme == "lopo") scheme.kind = model::SchemeKind::kLeaveOneParticipantOut;
        else throw ConfigError("--scheme must be kfold or lopo");
        scheme.folds = o->folds;
        scheme.shuffle = o->shuffle;
        scheme.seed = o->m.seed;
        model::CrossvalOptions opts;
        opts.fine_tune_seconds = o->fine_tune_seconds;
        if (o->fine_tune) {
          auto ft = tc;
          ft.learning_rate = o->fine_tune_lr.value_or(tc.learning_rate / 10.0);
          opts.fine_tune = ft;
        }
        const auto sessions = load_sessions(o->sessions, o->m.guard);
        const auto sp = pointers(sessions);
        const auto report =
            mc.kind == model::ModelKind::kRidge
                ? model::crossval_ridge(sp, scheme, mc, opts)
                : model::crossval(sp, scheme, [&](model::SessionList train, std::size_t fold) {
                    auto t = tc;
                    t.seed = tc.seed + fold;
                    std::cout << "fold " << fold << ": training on " << train.size() << " sessions\n";
                    return model::train_conv(train, mc, t).model;
                  }, opts);
        std::ofstream csv(o->out);
        model::write_crossval_csv(csv, report);
        if (!csv) throw DataError("cannot write " + o->out);
        model::write_crossval_text(std::cout, report);

        c.manifest.command = "crossval";
        c.manifest.seed = o->m.seed;
        c.manifest.config = o->m.to_json(mc, tc);
        c.manifest.config["sessions"] = o->sessions;
        c.manifest.config["scheme"] = {{"kind", o->scheme}, {"folds", o->folds}, {"shuffle", o->shuffle}};
        c.manifest.config["fine_tune"] = o->fine_tune ? json(o->fine_tune_seconds) : json(nullptr);
        json folds = json::array();
        for (const auto& f : report.folds)
          folds.push_back({{"fold", f.fold}, {"test", f.test_ids}, {"report", report_json(f.report)}});
        c.manifest.outputs = {o->out};
        c.manifest.results = {{"mean", report_json(report.mean)}, {"pooled", report_json(report.pooled)},
                              {"folds", folds}};
        c.manifest.write(app::manifest_path_for(o->out));
      };
    });
  }

  // blink-eval
  {
    struct Opts {
      std::string model, out, events_dir;
      std::vector<std::string> sessions;
      std::size_t guard = 6;
      double on = 250.0, off = 150.0, tolerance = 0.15;
      bool force = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("blink-eval", "Detect blink events from predictions and score them");
    cmd->add_option("--model", o->model, "Model with eyeBlink outputs")->required();
    cmd->add_option("--sessions", o->sessions, "Test sessions")->required();
    cmd->add_option("--out", o->out, "Per-session CSV of tp,fp,fn,precision,recall,f1")->required();
    cmd->add_option("--events-dir", o->events_dir, "Also write predicted and true events per session here");
    cmd->add_option("--guard-frames", o->guard, "Frames skipped after the clap")->capture_default_str();
    cmd->add_option("--on", o->on, "Hysteresis upper threshold")->capture_default_str();
    cmd->add_option("--off", o->off, "Hysteresis lower threshold")->capture_default_str();
    cmd->add_option("--tolerance", o->tolerance, "Match tolerance in seconds")->capture_default_str();
    cmd->add_flag("--force", o->force, "Overwrite existing outputs");
    cmd->callback([&run, o] {
      run = [o](Context& c) {
        check_overwrite(o->out, o->force);
        const auto m = model::load_model(o->model);
        if (!models_blinks(m)) throw ConfigError(o->model + " does not model eyeBlink_L/eyeBlink_R");
        if (!o->events_dir.empty()) fs::create_directories(o->events_dir);
        const auto sessions = load_sessions(o->sessions, o->guard);
        blink::ExtractorConfig ec;
        ec.on_threshold = o->on;
        ec.off_threshold = o->off;
        std::ofstream csv(o->out);
        csv << "session,tp,fp,fn,precision,recall,f1\n";
        std::vector<blink::MatchResult> parts;
        json per = json::object();
        for (const auto& s : sessions) {
          ec.frame_rate = s.frame_rate;
          const auto pred = blink::predicted_events(m, s, ec);
          const auto truth = blink::truth_events(s, ec);
          const auto r = blink::match_and_f1(pred, truth, s.frame_rate, o->tolerance);
          parts.push_back(r);
          csv << s.session_id << ',' << r.tp << ',' << r.fp << ',' << r.fn << ',' << r.precision << ',' << r.recall
              << ',' << r.f1 << '\n';
          per[s.session_id] = match_json(r);
          if (!o->events_dir.empty()) {
            blink::write_events_csv(fs::path(o->events_dir) / (s.session_id + ".pred.csv"), pred, s.frame_rate);
            blink::write_events_csv(fs::path(o->events_dir) / (s.session_id + ".true.csv"), truth, s.frame_rate);
          }
        }
        const auto all = blink::merge(parts);
        csv << "pooled," << all.tp << ',' << all.fp << ',' << all.fn << ',' << all.precision << ',' << all.recall
            << ',' << all.f1 << '\n';
        if (!csv) throw DataError("cannot write " + o->out);
        std::cout << "blink F1 " << all.f1 << "  precision " << all.precision << "  recall " << all.recall << '\n';
        c.manifest.command = "blink-eval";
        c.manifest.config = {{"model", o->model}, {"sessions", o->sessions}, {"on", o->on}, {"off", o->off},
                             {"tolerance_s", o->tolerance}, {"guard_frames", o->guard}};
        c.manifest.outputs = {o->out};
        if (!o->events_dir.empty()) c.manifest.outputs.push_back(o->events_dir);
        c.manifest.results = {{"pooled", match_json(all)}, {"sessions", per}};
        c.manifest.write(app::manifest_path_for(o->out));
      };
    });
  }
}

}  // namespace echoface::cli
