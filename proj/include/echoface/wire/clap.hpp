#pragma once

#include <cstddef>
#include <optional>

#include "echoface/fmcw/waveform.hpp"

namespace echoface::wire {

struct ClapDetectorConfig {
  double window_s = 0.005;
  double hop_s = 0.001;
  double baseline_s = 0.5;
  double threshold = 4.0;  // multiple of the baseline median RMS
};

/// Start sample of the first window whose RMS (pooled over channels) exceeds
/// `threshold` times the median RMS of the non-overlapping windows in the
/// preceding baseline span. nullopt when no window qualifies. Throws
/// DataError when the signal is shorter than the baseline span.
std::optional<std::size_t> detect_clap(const fmcw::Recording& x, const ClapDetectorConfig& cfg = {});
std::optional<std::size_t> detect_clap(const fmcw::Waveform& x, const ClapDetectorConfig& cfg = {});

}  // namespace echoface::wire
