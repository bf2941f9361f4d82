#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "echoface/fmcw/profile.hpp"

namespace echoface::fmcw {

inline constexpr std::size_t kWindowFrames = 84;
inline constexpr std::size_t kReceiverChannels = 2;

/// Model input: truncated bins of channel 0 stacked above channel 1 (rows),
/// consecutive differential profiles oldest first (columns). Column t holds
/// the profile of frame `current_frame - (cols - 1 - t)`.
struct EchoWindow {
  Eigen::MatrixXd values;
  std::int64_t current_frame = 0;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

struct WindowShape {
  std::size_t n_bins = kTruncatedBins;
  std::size_t n_channels = kReceiverChannels;
  std::size_t n_frames = kWindowFrames;

  std::size_t rows() const { return n_bins * n_channels; }
  std::size_t size() const { return rows() * n_frames; }
  bool operator==(const WindowShape&) const = default;
};

/// Stacks the truncated bins of every channel into one column.
Eigen::VectorXd stack_channels(const DiffProfile& p, std::size_t n_bins = kTruncatedBins);

/// Builds a window from scratch from the most recent `shape.n_frames` profiles,
/// which must be consecutive. Returns nullopt when fewer are supplied.
std::optional<EchoWindow> build_window(std::span<const DiffProfile> recent, WindowShape shape = {});

/// Sliding window maintained incrementally: each pushed profile contributes one
/// column and evicts the oldest.
class WindowBuilder {
 public:
  explicit WindowBuilder(WindowShape shape = {});

  void push(const DiffProfile& p);
  /// Pushes an already stacked column (rows() entries) for `frame_index`.
  void push_column(std::span<const double> column, std::int64_t frame_index);
  void reset();

  bool ready() const { return filled_ >= shape_.n_frames; }
  std::size_t buffered() const { return filled_; }
  const WindowShape& shape() const { return shape_; }
  /// Window ending at the newest frame, or nullopt until enough frames arrive.
  std::optional<EchoWindow> window() const;
  void copy_window(Eigen::Ref<Eigen::MatrixXd> out) const;

 private:
  WindowShape shape_;
  Eigen::MatrixXd ring_;  // rows x n_frames, column head_ is the next slot
  std::size_t head_ = 0;
  std::size_t filled_ = 0;
  std::int64_t last_frame_ = 0;
};

}  // namespace echoface::fmcw
