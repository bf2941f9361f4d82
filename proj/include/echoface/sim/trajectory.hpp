#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "echoface/face/blendshape.hpp"

namespace echoface::sim {

/// Blendshape values over time, one row per frame (frame k sampled at the
/// centre of its frame interval, i.e. t = (k + 0.5) / frame_rate).
struct Trajectory {
  Eigen::MatrixXd frames;  // n_frames x 52, scaled units
  double frame_rate = 0.0;

  std::size_t n_frames() const { return static_cast<std::size_t>(frames.rows()); }
  double duration() const { return frame_rate > 0.0 ? n_frames() / frame_rate : 0.0; }
  void validate() const;
};

enum class Preset {
  kOpenMouth,
  kOMouth,
  kOpenEyes,
  kCloseEyes,
  kCloseLeftEye,
  kCloseRightEye,
  kSmile,
  kSneerLeft,
  kSneerRight,
};

inline constexpr std::size_t kNumPresets = 9;
std::string_view preset_id(Preset p);
Preset parse_preset(std::string_view id);  // throws ConfigError
std::vector<Preset> all_presets();
/// Peak pattern of a preset normalized to degree of deformation 1.
face::BlendshapeVector preset_pattern(Preset p);
/// The two-eye closure pattern used for spontaneous blinks (eyeBlink = 1).
face::BlendshapeVector blink_pattern();

/// Per-expression timing: neutral -> ramp -> hold -> ramp -> pause.
struct Timing {
  double ramp_min = 0.15, ramp_max = 0.25;
  double hold_min = 1.15, hold_max = 1.45;
  double pause_min = 0.2, pause_max = 0.35;
  /// Probability that the peak degree is drawn from [low_min, low_max)
  /// rather than [high_min, high_max].
  double low_probability = 0.9;
  double low_min = 55.0, low_max = 100.0;
  double high_min = 100.0, high_max = 200.0;

  void validate() const;
  /// Long holds, like a guided recording session.
  static Timing lab();
  /// Brief expressions separated by at least one second of rest.
  static Timing closed_loop();
};

struct BlinkSpec {
  bool enabled = true;
  double rate_min = 10.0, rate_max = 25.0;  // per minute
  double duration_min = 0.15, duration_max = 0.3;  // s
  double peak_min = 300.0, peak_max = 600.0;
  /// Place exactly this many blinks on a jittered uniform grid instead of
  /// drawing intervals from the rate range.
  std::optional<int> exact_count;

  void validate() const;
};

struct BlinkTruth {
  double onset_s = 0.0;
  double duration_s = 0.0;
  double peak = 0.0;
};

struct TrajectorySpec {
  std::vector<Preset> presets = all_presets();
  int repetitions = 6;
  double frame_rate = 50000.0 / 600.0;
  /// 0 means "just long enough for the expressions".
  double duration_s = 120.0;
  double lead_in_s = 1.0;
  bool shuffle = true;
  Timing timing = Timing::lab();
  BlinkSpec blinks;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthResult {
  Trajectory trajectory;
  std::vector<BlinkTruth> blinks;
  double expressions_end_s = 0.0;
};

SynthResult synth_trajectory_ex(const TrajectorySpec& spec);
Trajectory synth_trajectory(const TrajectorySpec& spec);
Trajectory synth_trajectory(const std::vector<Preset>& presets, int repetitions, double frame_rate,
                            std::uint64_t seed = 1);

Trajectory neutral_trajectory(std::size_t n_frames, double frame_rate);
/// Linear resampling onto a new frame clock (both clocks frame-centred).
Trajectory resample(const Trajectory& t, double new_rate, std::optional<std::size_t> n_out = std::nullopt);
/// Row at fractional frame position by linear interpolation, clamped at the ends.
void interpolate_row(const Trajectory& t, double position, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out);

void to_json(nlohmann::json& j, const TrajectorySpec& s);
void from_json(const nlohmann::json& j, TrajectorySpec& s);

}  // namespace echoface::sim
