#include "echoface/fmcw/window.hpp"

#include <string>

#include "echoface/common/error.hpp"

namespace echoface::fmcw {

Eigen::VectorXd stack_channels(const DiffProfile& p, std::size_t n_bins) {
  const Eigen::MatrixXd t = truncate_bins(p, n_bins);
  Eigen::VectorXd col(t.size());
  for (Eigen::Index c = 0; c < t.cols(); ++c) {
    col.segment(c * t.rows(), t.rows()) = t.col(c);
  }
  return col;
}

std::optional<EchoWindow> build_window(std::span<const DiffProfile> recent, WindowShape shape) {
  if (recent.size() < shape.n_frames) return std::nullopt;
  const auto first = recent.size() - shape.n_frames;
  EchoWindow w;
  w.values.resize(static_cast<Eigen::Index>(shape.rows()), static_cast<Eigen::Index>(shape.n_frames));
  for (std::size_t t = 0; t < shape.n_frames; ++t) {
    const DiffProfile& p = recent[first + t];
    if (static_cast<std::size_t>(p.values.cols()) != shape.n_channels) {
      throw ShapeError("build_window: channel count mismatch");
    }
    if (t > 0 && p.frame_index != recent[first + t - 1].frame_index + 1) {
      throw ShapeError("build_window: profiles are not consecutive");
    }
    w.values.col(static_cast<Eigen::Index>(t)) = stack_channels(p, shape.n_bins);
  }
  w.current_frame = recent.back().frame_index;
  return w;
}

WindowBuilder::WindowBuilder(WindowShape shape) : shape_(shape) {
  if (shape_.n_frames == 0 || shape_.rows() == 0) throw ConfigError("window shape must be non-empty");
  ring_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(shape_.rows()),
                                static_cast<Eigen::Index>(shape_.n_frames));
}

void WindowBuilder::reset() {
  ring_.setZero();
  head_ = 0;
  filled_ = 0;
  last_frame_ = 0;
}

void WindowBuilder::push(const DiffProfile& p) {
  if (static_cast<std::size_t>(p.values.cols()) != shape_.n_channels) {
    throw ShapeError("WindowBuilder: channel count mismatch");
  }
  const Eigen::VectorXd col = stack_channels(p, shape_.n_bins);
  push_column(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), p.frame_index);
}

void WindowBuilder::push_column(std::span<const double> column, std::int64_t frame_index) {
  if (column.size() != shape_.rows()) throw ShapeError("WindowBuilder: column length mismatch");
  if (filled_ > 0 && frame_index != last_frame_ + 1) {
    throw ShapeError("WindowBuilder: expected frame " + std::to_string(last_frame_ + 1) + ", got " +
                     std::to_string(frame_index));
  }
  ring_.col(static_cast<Eigen::Index>(head_)) =
      Eigen::Map<const Eigen::VectorXd>(column.data(), static_cast<Eigen::Index>(column.size()));
  head_ = (head_ + 1) % shape_.n_frames;
  if (filled_ < shape_.n_frames) ++filled_;
  last_frame_ = frame_index;
}

void WindowBuilder::copy_window(Eigen::Ref<Eigen::MatrixXd> out) const {
  if (!ready()) throw DataError("WindowBuilder: window not ready");
  // Oldest column sits at head_ once the ring is full.
  const auto n = static_cast<Eigen::Index>(shape_.n_frames);
  const auto h = static_cast<Eigen::Index>(head_);
  out.leftCols(n - h) = ring_.rightCols(n - h);
  if (h > 0) out.rightCols(h) = ring_.leftCols(h);
}

std::optional<EchoWindow> WindowBuilder::window() const {
  if (!ready()) return std::nullopt;
  EchoWindow w;
  w.values.resize(ring_.rows(), ring_.cols());
  copy_window(w.values);
  w.current_frame = last_frame_;
  return w;
}

}  // namespace echoface::fmcw
