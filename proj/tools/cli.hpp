#pragma once

#include <CLI11.hpp>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "echoface/app/manifest.hpp"
#include "echoface/model/dataset.hpp"

namespace echoface::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitBudget = 3;

/// Thrown by a command to end with a specific exit code after printing.
struct ExitRequest : std::runtime_error {
  int code;
  ExitRequest(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

/// Shared state handed to every command: the raw command line and the
/// manifest being filled in.
struct Context {
  std::vector<std::string> argv;
  app::Manifest manifest;
};

using Runner = std::function<void(Context&)>;

void register_signal_commands(CLI::App& app, Runner& run);
void register_model_commands(CLI::App& app, Runner& run);
void register_runtime_commands(CLI::App& app, Runner& run);

/// Loads each path as a session directory or .eeds file.
std::vector<model::SessionData> load_sessions(const std::vector<std::string>& paths, std::size_t guard_frames = 6);
std::vector<const model::SessionData*> pointers(const std::vector<model::SessionData>& v);

/// Refuses to replace an existing file unless forced.
void check_overwrite(const std::filesystem::path& p, bool force);

/// Frame-indexed predictions as a blendshape CSV.
void write_predictions_csv(const std::filesystem::path& path, const Eigen::MatrixXd& pred,
                           const std::vector<std::int64_t>& frames, double frame_rate);

}  // namespace echoface::cli
