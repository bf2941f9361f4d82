#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace echoface::app {

inline constexpr const char* kVersion = "0.3.0";

/// CPU model, logical cores and memory as reported by the OS.
nlohmann::json hardware_description();
nlohmann::json build_description();

/// Everything needed to repeat a run: the command line, the resolved
/// configuration, the seed, and the build and host it ran on.
struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  nlohmann::json outputs = nlohmann::json::array();
  nlohmann::json results = nlohmann::json::object();

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

/// Manifest location for an output path: <dir>/manifest.json for
/// directories, <file>.manifest.json otherwise.
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

}  // namespace echoface::app
