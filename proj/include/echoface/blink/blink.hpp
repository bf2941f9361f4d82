#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "echoface/face/blendshape.hpp"

namespace echoface::blink {

struct BlinkEvent {
  std::int64_t onset = 0;   // first frame of the excursion above the off threshold
  std::int64_t offset = 0;  // first frame back at or below it
  double peak = 0.0;

  bool operator==(const BlinkEvent&) const = default;
};

struct ExtractorConfig {
  double on_threshold = 250.0;
  double off_threshold = 150.0;
  double min_duration_s = 0.08;
  double max_duration_s = 0.5;
  double frame_rate = 50000.0 / 600.0;
  void validate() const;
};

/// Mean of eyeBlink_L and eyeBlink_R per frame.
std::vector<double> blink_signal(std::span<const face::BlendshapeVector> frames);
/// Same for an F x 52 matrix.
std::vector<double> blink_signal(const Eigen::MatrixXd& frames);
std::vector<double> blink_signal(const Eigen::VectorXd& left, const Eigen::VectorXd& right);

/// Hysteresis: an event opens once the signal reaches on_threshold and closes
/// at the first frame at or below off_threshold. Its onset is backdated to
/// the start of the run above off_threshold. Events outside the duration
/// bounds are dropped; one still open at the end closes there. Frame indices
/// are offset by `first_frame`.
std::vector<BlinkEvent> extract_events(std::span<const double> signal, const ExtractorConfig& cfg = {},
                                       std::int64_t first_frame = 0);

struct MatchResult {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

/// Greedy one-to-one matching on onset distance, closest pairs first, within
/// ±tolerance_s. With no predictions and no ground truth, F1 is 1.
MatchResult match_and_f1(std::span<const BlinkEvent> pred, std::span<const BlinkEvent> gt, double frame_rate,
                         double tolerance_s = 0.15);
MatchResult merge(std::span<const MatchResult> parts);

/// onset_s,offset_s,peak
void write_events_csv(std::ostream& os, std::span<const BlinkEvent> events, double frame_rate);
void write_events_csv(const std::filesystem::path& path, std::span<const BlinkEvent> events, double frame_rate);
std::vector<BlinkEvent> read_events_csv(std::istream& is, double frame_rate);

}  // namespace echoface::blink
