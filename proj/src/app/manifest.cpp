#include "echoface/app/manifest.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include <sys/sysinfo.h>

#include "echoface/common/error.hpp"

namespace echoface::app {

nlohmann::json hardware_description() {
  std::string cpu = "unknown";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(line.find_first_not_of(' ', colon + 1));
      break;
    }
  }
  nlohmann::json j = {{"cpu", cpu}, {"logical_cores", std::thread::hardware_concurrency()}};
  struct sysinfo si {};
  if (sysinfo(&si) == 0) j["memory_bytes"] = static_cast<std::uint64_t>(si.totalram) * si.mem_unit;
  return j;
}

nlohmann::json build_description() {
  nlohmann::json j;
#if defined(__clang__)
  j["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  j["compiler"] = std::string("gcc ") + __VERSION__;
#endif
#ifdef NDEBUG
  j["assertions"] = false;
#else
  j["assertions"] = true;
#endif
  j["cxx_standard"] = static_cast<long>(__cplusplus);
  return j;
}

nlohmann::json Manifest::to_json() const {
  const auto now = std::chrono::system_clock::now();
  return {{"tool", "echoface"},
          {"version", kVersion},
          {"command", command},
          {"argv", argv},
          {"config", config},
          {"seed", seed},
          {"outputs", outputs},
          {"results", results},
          {"build", build_description()},
          {"hardware", hardware_description()},
          {"created_unix_s", std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()}};
}

void Manifest::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  os << to_json().dump(2) << '\n';
  if (!os) throw DataError("cannot write manifest " + path.string());
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  if (std::filesystem::is_directory(output)) return output / "manifest.json";
  auto p = output;
  p += ".manifest.json";
  return p;
}

}  // namespace echoface::app
