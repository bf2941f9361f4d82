#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "echoface/face/blendshape.hpp"
#include "echoface/fmcw/pipeline.hpp"
#include "echoface/fmcw/window.hpp"
#include "echoface/wire/align.hpp"

namespace echoface::model {

using WindowMap = Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>>;

/// One processed session. Windows are views into `columns`: window i ends at
/// frame k = i + shape.n_frames and covers columns k-83..k.
struct SessionData {
  std::string session_id;
  std::string participant;  // grouping key for leave-one-out schemes
  Eigen::MatrixXd columns;  // rows x n_frames differential columns
  Eigen::MatrixXd gt;       // n_frames x 52
  std::vector<std::uint8_t> frame_valid;
  fmcw::WindowShape shape;
  double frame_rate = 50000.0 / 600.0;

  std::size_t n_frames() const { return static_cast<std::size_t>(columns.cols()); }
  std::size_t n_windows() const { return n_frames() > shape.n_frames ? n_frames() - shape.n_frames : 0; }
  std::size_t frame_of(std::size_t window) const { return window + shape.n_frames; }
  WindowMap window(std::size_t i) const;
  /// Target aligned with the window's newest column.
  Eigen::RowVectorXd target(std::size_t i) const { return gt.row(static_cast<Eigen::Index>(frame_of(i))); }
  /// Ground truth one window length earlier (frame k - 84).
  Eigen::RowVectorXd baseline(std::size_t i) const {
    return gt.row(static_cast<Eigen::Index>(frame_of(i) - shape.n_frames));
  }
  void validate() const;
};

/// Materialized window, for export and inspection.
struct DatasetWindow {
  fmcw::EchoWindow input;
  face::BlendshapeVector target{};
  std::string session_id;
  std::int64_t frame_index = 0;
};

/// Runs the DSP pipeline over an aligned session. Throws DataError when the
/// session has fewer than shape.n_frames + 1 frames.
SessionData assemble_dataset(const wire::AlignedSession& session, const fmcw::PipelineConfig& config,
                             std::string session_id, std::string participant = {});

std::vector<DatasetWindow> materialize(const SessionData& s, std::size_t first = 0,
                                       std::size_t count = static_cast<std::size_t>(-1));

/// Same session restricted to frames [begin, begin + count).
SessionData slice_frames(const SessionData& s, std::size_t begin, std::size_t count);

/// Columns file: "EEDS" magic, version, rows, frames, then columns as f64
/// column-major, validity bytes and the ground truth (frames x 52, f64).
void save_session_data(const std::string& path, const SessionData& s);
SessionData load_session_data(const std::string& path);

}  // namespace echoface::model
