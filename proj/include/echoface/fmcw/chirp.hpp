#pragma once

#include <cstddef>

#include "echoface/fmcw/waveform.hpp"

namespace echoface::fmcw {

inline constexpr double kSpeedOfSound = 340.0;  // m/s

/// Linear FMCW sweep transmitted once per frame.
struct ChirpSpec {
  double f_lo = 16000.0;
  double f_hi = 20000.0;
  double fs = 50000.0;
  std::size_t n_samples = 600;
  double amplitude = 1.0;

  /// Throws ConfigError naming the first violated bound.
  void validate() const;

  double frame_duration() const { return static_cast<double>(n_samples) / fs; }
  double frame_rate() const { return fs / static_cast<double>(n_samples); }
  double bandwidth() const { return f_hi - f_lo; }

  static ChirpSpec standard() { return {}; }
  /// Shifted operating band used when 16-20 kHz is audible to the wearer.
  static ChirpSpec high_band() { return {20000.0, 24000.0, 50000.0, 600, 1.0}; }
};

/// samples[i] = A sin(2 pi (f_lo t + (f_hi - f_lo) t^2 / (2T))), t = i / fs, T = N / fs.
Waveform generate_chirp(const ChirpSpec& spec);

/// Instantaneous frequency of the sweep at sample position i (may be fractional).
double chirp_instantaneous_frequency(const ChirpSpec& spec, double i);

}  // namespace echoface::fmcw
