#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "echoface/fmcw/waveform.hpp"
#include "echoface/sim/trajectory.hpp"
#include "echoface/wire/packet.hpp"

namespace echoface::wire {

inline constexpr std::size_t kMinAlignedFrames = 85;

struct AlignOptions {
  std::size_t frame_len = 600;
  /// Frames skipped after the clap so the burst itself stays out of the data.
  std::size_t guard_frames = 0;
  std::size_t min_frames = kMinAlignedFrames;
  /// Start at the first frame boundary at or after the clap. Sample 0 of the
  /// recording is assumed to be a chirp boundary, as on the device.
  bool snap_to_frame_grid = true;
};

/// A recording trimmed to whole frames, with ground truth resampled to one
/// row per frame (row k belongs to the centre of frame k).
struct AlignedSession {
  fmcw::Recording signal;
  Eigen::MatrixXd gt;  // n_frames x 52
  double gt_rate = 0.0;
  std::uint64_t offset = 0;  // samples trimmed from the original signal
  std::size_t frame_len = 600;
  std::vector<std::uint8_t> frame_valid;

  std::size_t n_frames() const { return static_cast<std::size_t>(gt.rows()); }
  double frame_rate() const { return signal.fs / static_cast<double>(frame_len); }
  /// The same session as a trajectory at the frame rate.
  sim::Trajectory gt_trajectory() const;
};

/// `clap_signal_idx` is the clap's sample index; `clap_gt_frame` is its
/// fractional row position in `gt` (row j sits at time (j + 0.5) / rate).
/// `losses` are in the untrimmed signal's sample coordinates.
AlignedSession align(const fmcw::Recording& signal, const sim::Trajectory& gt, std::size_t clap_signal_idx,
                     double clap_gt_frame, const AlignOptions& opts = {},
                     std::span<const LossInterval> losses = {});

/// Row position of a time (s) on a frame-centred clock.
inline double row_position(double time_s, double rate) { return time_s * rate - 0.5; }

}  // namespace echoface::wire
