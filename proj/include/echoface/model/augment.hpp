#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

#include "echoface/fmcw/pipeline.hpp"
#include "echoface/model/dataset.hpp"

namespace echoface::model {

inline constexpr int kMaxVerticalShift = 3;

/// Shifts each channel's block of n_bins rows down by k rows (k < 0 moves
/// them up); vacated rows become zero. Works on windows and on whole column
/// matrices alike.
void shift_rows(Eigen::Ref<Eigen::MatrixXd> m, const fmcw::WindowShape& shape, int k);

DatasetWindow augment_vertical_shift(const DatasetWindow& w, int k);
/// Uniform shift in [-max_k, max_k] drawn from `seed`.
DatasetWindow augment_vertical_shift_random(const DatasetWindow& w, int max_k, std::uint64_t seed);

/// Whole-session shift: every window of the result equals the shifted window.
SessionData shift_session(const SessionData& s, int k);

/// Differential columns of motion-only recordings.
class MotionBank {
 public:
  MotionBank() = default;
  explicit MotionBank(Eigen::MatrixXd columns);

  bool empty() const { return columns_.cols() == 0; }
  std::size_t rows() const { return static_cast<std::size_t>(columns_.rows()); }
  std::size_t n_columns() const { return static_cast<std::size_t>(columns_.cols()); }
  const Eigen::MatrixXd& columns() const { return columns_; }

  /// Adds `scale` times a random run of out.cols() consecutive bank columns.
  void add_excerpt(Eigen::Ref<Eigen::MatrixXd> out, double scale, std::mt19937_64& rng) const;

 private:
  Eigen::MatrixXd columns_;
};

/// Device-sway recording: every face reflector of the default scene moves by a
/// common smoothed random walk (a few millimetres), with no expression change.
MotionBank make_motion_bank(const fmcw::PipelineConfig& config, double seconds, std::uint64_t seed,
                            double sway_m = 0.003);

/// Throws ConfigError on an empty bank.
DatasetWindow augment_motion(const DatasetWindow& w, const MotionBank& bank, double scale, std::uint64_t seed);

/// Adds `scale` times bank columns to every column of the session, starting
/// at a random bank offset and wrapping around.
SessionData overlay_motion(const SessionData& s, const MotionBank& bank, double scale, std::uint64_t seed);

}  // namespace echoface::model
