#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "echoface/face/blendshape.hpp"

namespace echoface::sim {

/// A surface whose one-way distance follows the face state:
///   d(t) = base_distance + gain * (mix . b(t)) / 1000
struct Reflector {
  int channel = 0;
  double base_distance = 0.05;  // m
  double reflectivity = 0.5;
  face::BlendshapeVector mix{};
  double gain = 0.001;  // m per unit of normalized blendshape
  /// Face reflectors are held to the near-field range; probe reflectors used
  /// by range tests only need to stay inside the unambiguous range.
  bool face = true;
};

/// Static background echo.
struct ClutterReflector {
  int channel = 0;
  double distance = 1.0;  // m
  double reflectivity = 0.3;
};

struct AudibleBand {
  double f_max = 5000.0;
  /// Signal-to-noise ratio of the audible noise against the clean signal.
  double snr_db = -10.0;
};

struct NoiseSpec {
  std::optional<double> white_snr_db;
  std::optional<AudibleBand> audible_band;

  bool enabled() const { return white_snr_db.has_value() || audible_band.has_value(); }
  void validate() const;
};

struct Scene {
  std::vector<Reflector> reflectors;
  std::vector<ClutterReflector> clutter;
  NoiseSpec noise;
  std::vector<double> clap_times;  // s
  double received_gain = 0.15;
  bool inverse_square = false;  // scale echoes by (0.1 m / d)^2

  void validate() const;
};

inline constexpr double kFaceMinDistance = 0.005;
inline constexpr double kFaceMaxDistance = 0.15;
inline constexpr double kClutterMinDistance = 0.12;

/// Four moving reflectors per channel (2.5-8.5 cm) plus two clutter
/// reflectors per channel at 0.7-1.3 m, and one clap at 0.6 s.
Scene default_scene();
/// No clutter, no claps, a single stationary probe reflector.
Scene single_reflector_scene(double distance, int channel = 0, double reflectivity = 1.0);
/// Default scene with every face reflector moved by `offset` metres.
Scene shifted_scene(const Scene& scene, double offset);

face::BlendshapeVector mix_from_pairs(std::initializer_list<std::pair<const char*, double>> pairs);

void to_json(nlohmann::json& j, const Scene& s);
void from_json(const nlohmann::json& j, Scene& s);
Scene load_scene(const std::string& path);
void save_scene(const std::string& path, const Scene& s);

}  // namespace echoface::sim
