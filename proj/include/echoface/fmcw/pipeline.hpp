#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "echoface/fmcw/bandpass.hpp"
#include "echoface/fmcw/chirp.hpp"
#include "echoface/fmcw/correlator.hpp"
#include "echoface/fmcw/profile.hpp"
#include "echoface/fmcw/window.hpp"

namespace echoface::fmcw {

/// Which waveform received frames are correlated against.
enum class TemplateKind {
  /// The generated chirp as transmitted.
  kRaw,
  /// The chirp's periodic steady-state response through the band-pass filter.
  /// Matching the filter on both sides cancels its group delay, so lag l keeps
  /// meaning a round trip of l samples.
  kFiltered,
};

struct PipelineConfig {
  ChirpSpec chirp;
  BandpassSpec bandpass;
  bool filter_enabled = true;
  TemplateKind template_kind = TemplateKind::kFiltered;
  WindowShape window;
  /// Input samples preceding each frame that are re-filtered from zero state
  /// along with it. 0 selects the settling length of the designed filter,
  /// rounded up to whole frames.
  std::size_t filter_history = 0;

  void validate() const;
  static PipelineConfig for_chirp(const ChirpSpec& chirp);
};

/// Per-session DSP state: band-pass, echo profile, differential profile and
/// the sliding window. Frames must be pushed in order.
///
/// Each frame is filtered together with a fixed span of preceding input,
/// starting from zero state. The output therefore depends only on a bounded
/// stretch of input (bit-identical inputs give bit-identical profiles), and
/// differs from unbounded causal filtering by less than the filter's settling
/// tolerance. History before the first frame is the periodic extension of
/// that frame.
class FramePipeline {
 public:
  struct Step {
    std::int64_t frame_index = 0;
    bool valid = true;
    const EchoProfile* profile = nullptr;
    const DiffProfile* diff = nullptr;  // null for the first frame
  };

  explicit FramePipeline(const PipelineConfig& config);

  const PipelineConfig& config() const { return config_; }
  const FilterCoefficients& filter() const { return filter_; }
  const std::vector<double>& correlation_template() const { return template_; }
  std::size_t history_samples() const { return history_len_; }

  /// One frame of every channel. An invalid frame (lost in transport) holds the
  /// previous echo profile, so its differential column is zero and the next
  /// valid frame carries the full change.
  Step push_frame(std::span<const std::span<const double>> channels, bool valid = true);

  bool window_ready() const { return builder_.ready(); }
  std::optional<EchoWindow> window() const { return builder_.window(); }
  const WindowBuilder& builder() const { return builder_; }
  std::int64_t frames_processed() const { return next_frame_; }
  void reset();

 private:
  void filter_frame(std::size_t channel, std::span<const double> frame, std::span<double> out);

  PipelineConfig config_;
  FilterCoefficients filter_;
  std::vector<double> template_;
  Correlator correlator_;
  std::size_t history_len_ = 0;
  std::vector<std::vector<double>> history_;  // per channel, last history_len_ inputs
  std::vector<double> scratch_in_;
  std::vector<double> scratch_out_;
  std::vector<double> lag_buf_;
  EchoProfile profile_;
  EchoProfile prev_profile_;
  DiffProfile diff_;
  WindowBuilder builder_;
  std::int64_t next_frame_ = 0;
};

/// Truncated differential columns for a whole recording.
struct ProcessedSession {
  /// window.rows() x n_frames; column k is frame k's stacked truncated
  /// differential profile. Columns 0 and 1 are zero: frame 0 has no
  /// predecessor, and its filter history is synthetic (out-of-band noise
  /// leaks into it through the frame-boundary discontinuities), so frame 1 is
  /// the first reference.
  Eigen::MatrixXd columns;
  std::vector<std::uint8_t> frame_valid;
  double frame_rate = 0.0;
  WindowShape shape;

  std::size_t n_frames() const { return static_cast<std::size_t>(columns.cols()); }
  /// Window ending at frame k (requires k >= shape.n_frames).
  Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>> window_at(std::size_t k) const;
  std::size_t first_window_frame() const { return shape.n_frames; }
};

using ProfileSink = std::function<void(const FramePipeline::Step&)>;

/// Runs the pipeline over every whole frame of `signal`. `frame_valid`, when
/// non-empty, flags frames damaged in transport.
ProcessedSession process_recording(const Recording& signal, const PipelineConfig& config,
                                   std::span<const std::uint8_t> frame_valid = {},
                                   const ProfileSink& sink = {});

}  // namespace echoface::fmcw
