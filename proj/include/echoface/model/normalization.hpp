#pragma once

#include <Eigen/Dense>
#include <span>

#include "echoface/model/dataset.hpp"

namespace echoface::model {

/// Per-row standardization of window inputs: x' = (x - mean[row]) / scale[row].
struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  std::size_t rows() const { return static_cast<std::size_t>(mean.size()); }
  bool empty() const { return mean.size() == 0; }
  void apply(Eigen::Ref<Eigen::MatrixXd> window) const;
  /// Identity statistics (mean 0, scale 1).
  static NormStats identity(std::size_t rows);
};

/// Running row sums; combine per-session moments to get fold statistics.
struct RowMoments {
  double count = 0.0;
  Eigen::VectorXd sum;
  Eigen::VectorXd sum_sq;

  void add(const RowMoments& other);
  NormStats stats() const;
};

/// Moments over the session's differential columns (frame 0, which has no
/// predecessor, is excluded).
RowMoments session_moments(const SessionData& s);

NormStats compute_norm_stats(std::span<const SessionData* const> training);

}  // namespace echoface::model
