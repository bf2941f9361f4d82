#include <filesystem>
#include <iostream>

#include <json.hpp>

#include "cli.hpp"
#include "echoface/app/session_io.hpp"
#include "echoface/common/error.hpp"
#include "echoface/face/blendshape.hpp"
#include "echoface/model/train.hpp"

namespace echoface::cli {

std::vector<model::SessionData> load_sessions(const std::vector<std::string>& paths, std::size_t guard_frames) {
  std::vector<model::SessionData> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(app::load_session_data(p, guard_frames));
  return out;
}

std::vector<const model::SessionData*> pointers(const std::vector<model::SessionData>& v) {
  std::vector<const model::SessionData*> p;
  for (const auto& s : v) p.push_back(&s);
  return p;
}

void check_overwrite(const std::filesystem::path& p, bool force) {
  if (std::filesystem::exists(p) && !force)
    throw app::OutputExists(p.string() + " exists; pass --force to overwrite");
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

void write_predictions_csv(const std::filesystem::path& path, const Eigen::MatrixXd& pred,
                           const std::vector<std::int64_t>& frames, double frame_rate) {
  face::BlendshapeTable t;
  t.values = pred;
  t.frame_index = frames;
  for (auto f : frames) t.timestamp_s.push_back(static_cast<double>(f) / frame_rate);
  face::write_blendshape_csv(path, t);
}

}  // namespace echoface::cli

int main(int argc, char** argv) {
  using namespace echoface;
  CLI::App app{"Acoustic facial expression sensing pipeline: simulation, DSP, training and evaluation"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1);
  app.set_version_flag("--version", app::kVersion);

  cli::Context ctx;
  ctx.argv.assign(argv, argv + argc);
  cli::Runner run;
  cli::register_signal_commands(app, run);
  cli::register_model_commands(app, run);
  cli::register_runtime_commands(app, run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  ctx.manifest.argv = ctx.argv;
  try {
    if (run) run(ctx);
    return cli::kExitOk;
  } catch (const cli::ExitRequest& e) {
    if (*e.what()) std::cerr << e.what() << '\n';
    return e.code;
  } catch (const app::OutputExists& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitUsage;
  } catch (const model::TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return cli::kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return cli::kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitData;
  }
}
