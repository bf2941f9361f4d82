#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace echoface::face {

inline constexpr std::size_t kNumBlendshapes = 52;
inline constexpr double kScaledMax = 1000.0;

// ARKit order with the _L/_R suffix convention.
inline constexpr std::array<std::string_view, kNumBlendshapes> kBlendshapeNames = {
    "eyeBlink_L",       "eyeLookDown_L",    "eyeLookIn_L",     "eyeLookOut_L",    "eyeLookUp_L",
    "eyeSquint_L",      "eyeWide_L",        "eyeBlink_R",      "eyeLookDown_R",   "eyeLookIn_R",
    "eyeLookOut_R",     "eyeLookUp_R",      "eyeSquint_R",     "eyeWide_R",       "jawForward",
    "jawLeft",          "jawRight",         "jawOpen",         "mouthClose",      "mouthFunnel",
    "mouthPucker",      "mouthLeft",        "mouthRight",      "mouthSmile_L",    "mouthSmile_R",
    "mouthFrown_L",     "mouthFrown_R",     "mouthDimple_L",   "mouthDimple_R",   "mouthStretch_L",
    "mouthStretch_R",   "mouthRollLower",   "mouthRollUpper",  "mouthShrugLower", "mouthShrugUpper",
    "mouthPress_L",     "mouthPress_R",     "mouthLowerDown_L", "mouthLowerDown_R", "mouthUpperUp_L",
    "mouthUpperUp_R",   "browDown_L",       "browDown_R",      "browInnerUp",     "browOuterUp_L",
    "browOuterUp_R",    "cheekPuff",        "cheekSquint_L",   "cheekSquint_R",   "noseSneer_L",
    "noseSneer_R",      "tongueOut",
};

/// Upper face = eye* and brow*; everything else (mouth, jaw, cheek, nose,
/// tongue) is lower face.
constexpr bool is_upper_face(std::string_view name) {
  return name.starts_with("eye") || name.starts_with("brow");
}

namespace detail {
template <bool Upper>
constexpr std::size_t count_part() {
  std::size_t n = 0;
  for (auto name : kBlendshapeNames) n += (is_upper_face(name) == Upper) ? 1 : 0;
  return n;
}
template <bool Upper, std::size_t N>
constexpr std::array<std::size_t, N> part_indices() {
  std::array<std::size_t, N> out{};
  std::size_t j = 0;
  for (std::size_t i = 0; i < kNumBlendshapes; ++i)
    if (is_upper_face(kBlendshapeNames[i]) == Upper) out[j++] = i;
  return out;
}
}  // namespace detail

inline constexpr std::size_t kLowerCount = detail::count_part<false>();
inline constexpr std::size_t kUpperCount = detail::count_part<true>();
static_assert(kLowerCount == 33, "lower-face partition must hold 33 parameters");
static_assert(kUpperCount == 19, "upper-face partition must hold 19 parameters");
static_assert(kLowerCount + kUpperCount == kNumBlendshapes);

inline constexpr std::array<std::size_t, kLowerCount> kLowerIndices = detail::part_indices<false, kLowerCount>();
inline constexpr std::array<std::size_t, kUpperCount> kUpperIndices = detail::part_indices<true, kUpperCount>();

enum class Part { kAll, kLower, kUpper };

std::span<const std::size_t> part_indices(Part part);
std::optional<std::size_t> index_of(std::string_view name);
std::size_t require_index(std::string_view name);  // throws ConfigError

inline const std::size_t kEyeBlinkL = 0;
inline const std::size_t kEyeBlinkR = 7;

using BlendshapeVector = std::array<double, kNumBlendshapes>;

/// Counts values pushed into range by the clamp policy.
struct ClampCounter {
  std::uint64_t clamped = 0;
};

/// raw ARKit coefficients (nominally [0,1]) → scaled units [0,1000].
BlendshapeVector scale_arkit(std::span<const double> raw, ClampCounter* counter = nullptr);
double clamp_scaled(double v, ClampCounter* counter = nullptr);
void clamp_rows(Eigen::Ref<Eigen::MatrixXd> frames, ClampCounter* counter = nullptr);

/// Frames of blendshape values, one row per frame, 52 columns.
struct BlendshapeTable {
  Eigen::MatrixXd values;
  std::vector<std::int64_t> frame_index;
  std::vector<double> timestamp_s;

  std::size_t n_frames() const { return static_cast<std::size_t>(values.rows()); }
};

/// Header: frame_index,timestamp_s,<52 names>.
void write_blendshape_csv(std::ostream& os, const BlendshapeTable& table);
void write_blendshape_csv(const std::filesystem::path& path, const BlendshapeTable& table);
BlendshapeTable read_blendshape_csv(std::istream& is);
BlendshapeTable read_blendshape_csv(const std::filesystem::path& path);
/// Table with frame_index 0.. and timestamps index/rate.
BlendshapeTable make_table(const Eigen::MatrixXd& values, double frame_rate, double t0 = 0.0);

}  // namespace echoface::face
