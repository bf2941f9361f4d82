#include "echoface/wire/align.hpp"

#include <cmath>

#include "echoface/common/error.hpp"

namespace echoface::wire {

sim::Trajectory AlignedSession::gt_trajectory() const {
  sim::Trajectory t;
  t.frames = gt;
  t.frame_rate = frame_rate();
  return t;
}

AlignedSession align(const fmcw::Recording& signal, const sim::Trajectory& gt, std::size_t clap_signal_idx,
                     double clap_gt_frame, const AlignOptions& opts, std::span<const LossInterval> losses) {
  signal.validate();
  if (opts.frame_len == 0) throw ConfigError("align: zero frame length");
  if (gt.n_frames() == 0) throw DataError("align: empty ground truth");
  if (clap_signal_idx >= signal.n_samples()) throw DataError("align: clap index beyond the signal");

  const double n = static_cast<double>(opts.frame_len);
  const double step = n * gt.frame_rate / signal.fs;  // gt rows per frame
  // Frames stay on the recording's chirp grid; starting mid-chirp would rotate
  // every circular correlation by the misalignment.
  const std::size_t grid = opts.snap_to_frame_grid ? opts.frame_len : 1;
  const std::size_t origin = (clap_signal_idx + grid - 1) / grid * grid;
  const double lead = static_cast<double>(origin - clap_signal_idx) / n;
  auto position = [&](std::size_t k) {
    double p = clap_gt_frame + (lead + static_cast<double>(k) + 0.5) * step;
    const double r = std::round(p);
    if (std::abs(p - r) < 1e-9) p = r;  // keeps re-alignment exact
    return p;
  };

  std::size_t k0 = opts.guard_frames;
  while (position(k0) < 0.0) ++k0;
  const double last_row = static_cast<double>(gt.n_frames() - 1);
  const std::size_t start = origin + k0 * opts.frame_len;
  std::size_t frames = start < signal.n_samples() ? (signal.n_samples() - start) / opts.frame_len : 0;
  while (frames > 0 && position(k0 + frames - 1) > last_row) --frames;
  if (frames < opts.min_frames) {
    throw DataError("session too short after alignment: " + std::to_string(frames) + " frames (need " +
                    std::to_string(opts.min_frames) + ")");
  }

  AlignedSession a;
  a.frame_len = opts.frame_len;
  a.gt_rate = gt.frame_rate;
  a.offset = start;
  a.signal = signal.slice(start, frames * opts.frame_len);
  a.gt.resize(static_cast<Eigen::Index>(frames), gt.frames.cols());
  for (std::size_t k = 0; k < frames; ++k) sim::interpolate_row(gt, position(k0 + k), a.gt.row(static_cast<Eigen::Index>(k)));
  LossReport report;
  report.intervals.assign(losses.begin(), losses.end());
  a.frame_valid = frame_validity(report, frames * opts.frame_len, opts.frame_len, start);
  return a;
}

}  // namespace echoface::wire
