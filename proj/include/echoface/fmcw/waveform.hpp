#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace echoface::fmcw {

/// Single-channel real signal.
struct Waveform {
  std::vector<double> samples;
  double fs = 0.0;

  std::size_t size() const { return samples.size(); }
  double duration() const { return fs > 0.0 ? samples.size() / fs : 0.0; }
  /// Throws DataError on empty input, non-positive rate or non-finite samples.
  void validate() const;
};

/// Multi-channel signal with equal-length channels sharing one sample rate.
struct Recording {
  std::vector<std::vector<double>> channels;
  double fs = 0.0;

  std::size_t n_channels() const { return channels.size(); }
  std::size_t n_samples() const { return channels.empty() ? 0 : channels.front().size(); }
  double duration() const { return fs > 0.0 ? n_samples() / fs : 0.0; }
  void validate() const;

  Waveform channel(std::size_t c) const { return {channels.at(c), fs}; }
  /// Returns samples [begin, begin + count) of every channel.
  Recording slice(std::size_t begin, std::size_t count) const;
};

Recording make_recording(std::size_t n_channels, std::size_t n_samples, double fs);

}  // namespace echoface::fmcw
