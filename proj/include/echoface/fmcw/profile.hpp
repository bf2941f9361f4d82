#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "echoface/fmcw/chirp.hpp"
#include "echoface/fmcw/waveform.hpp"

namespace echoface::fmcw {

inline constexpr std::size_t kTruncatedBins = 30;

/// Correlation lags (rows) by receiver channel (columns) for one frame.
struct EchoProfile {
  Eigen::MatrixXd values;
  std::int64_t frame_index = 0;

  std::size_t n_lags() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_channels() const { return static_cast<std::size_t>(values.cols()); }
};

/// Difference of two adjacent echo profiles; frame_index is the later frame.
struct DiffProfile {
  Eigen::MatrixXd values;
  std::int64_t frame_index = 0;
};

/// Consecutive non-overlapping frames of n samples; a trailing partial frame is dropped.
std::vector<std::span<const double>> frame_stream(std::span<const double> x, std::size_t n);
std::size_t frame_count(std::size_t n_samples, std::size_t n);

/// cur - prev. Requires equal shapes and cur.frame_index == prev.frame_index + 1.
DiffProfile differential(const EchoProfile& prev, const EchoProfile& cur);

/// Lags 0..n_bins-1 of every channel: result is n_bins x n_channels.
Eigen::MatrixXd truncate_bins(const DiffProfile& p, std::size_t n_bins = kTruncatedBins);

/// One-way distance of lag `bin`: bin * (c / fs) / 2.
double bin_to_distance(std::size_t bin, double fs = 50000.0, double speed_of_sound = kSpeedOfSound);

/// One-way distance covered by `n_bins` lags.
double truncation_range(std::size_t n_bins = kTruncatedBins, double fs = 50000.0,
                        double speed_of_sound = kSpeedOfSound);

}  // namespace echoface::fmcw
