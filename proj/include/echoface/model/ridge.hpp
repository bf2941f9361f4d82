#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "echoface/model/dataset.hpp"
#include "echoface/model/normalization.hpp"

namespace echoface::model {

/// kAbsolute regresses b(t). kChange regresses b(t) - b(t - window length);
/// the model then reports rest + change, where rest is the per-parameter
/// minimum seen in training. Differential inputs only see motion, so the
/// change target is what the window actually determines.
enum class TargetMode : std::uint8_t { kAbsolute = 0, kChange = 1 };

const char* target_mode_name(TargetMode m);
TargetMode parse_target_mode(std::string_view s);

struct RidgeConfig {
  double lambda = 1e-4;
  /// Scale lambda by the mean diagonal of the normalized Gram matrix.
  bool relative_lambda = true;
  /// Extra training copies of each session shifted by these row offsets.
  std::vector<int> shifts;
  void validate() const;
};

/// Sufficient statistics of the flattened windows (column-major, dim =
/// rows * n_frames) and their targets.
struct GramStats {
  double n = 0.0;
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xsum;
  Eigen::MatrixXd xty;
  Eigen::RowVectorXd ysum;
  Eigen::RowVectorXd ysq;

  std::size_t dim() const { return static_cast<std::size_t>(xsum.size()); }
  std::size_t outputs() const { return static_cast<std::size_t>(ysum.size()); }
  void add(const GramStats& o);
  void subtract(const GramStats& o);
};

/// Targets for every window of the session (n_windows x outputs.size()).
Eigen::MatrixXd window_targets(const SessionData& s, TargetMode mode, std::span<const std::size_t> outputs);

/// Gram statistics exploiting the sliding structure: window blocks (a, a+d)
/// are lagged column products that differ between neighbouring offsets by one
/// term at each end.
GramStats session_gram(const SessionData& s, TargetMode mode, std::span<const std::size_t> outputs);
/// Reference implementation: explicit flattened rows, rank-k updates.
GramStats session_gram_direct(const SessionData& s, TargetMode mode, std::span<const std::size_t> outputs);

struct RidgeWeights {
  Eigen::MatrixXd w;        // dim x outputs, acts on normalized flattened windows
  Eigen::RowVectorXd bias;  // outputs
  double effective_lambda = 0.0;
};

/// Closed-form ridge with an unpenalized intercept. Throws DataError when the
/// normal matrix is numerically singular (advising lambda > 0).
RidgeWeights solve_ridge(const GramStats& g, const NormStats& norm, const fmcw::WindowShape& shape,
                         const RidgeConfig& cfg);

/// Ridge solution pulled toward `prior` instead of zero (used to fine-tune).
RidgeWeights solve_ridge_toward(const GramStats& g, const NormStats& norm, const fmcw::WindowShape& shape,
                                const RidgeConfig& cfg, const RidgeWeights& prior);

/// Raw-space predictions for each window of a session, before rest/clamp.
Eigen::MatrixXd ridge_predict_session(const RidgeWeights& r, const NormStats& norm, const SessionData& s);

}  // namespace echoface::model
