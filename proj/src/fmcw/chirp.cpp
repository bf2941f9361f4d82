#include "echoface/fmcw/chirp.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "echoface/common/error.hpp"

namespace echoface::fmcw {

void Waveform::validate() const {
  if (samples.empty()) throw DataError("waveform is empty");
  if (!(fs > 0.0)) throw DataError("waveform sample rate must be positive");
  for (double v : samples) {
    if (!std::isfinite(v)) throw DataError("waveform contains non-finite samples");
  }
}

void Recording::validate() const {
  if (channels.empty()) throw DataError("recording has no channels");
  if (!(fs > 0.0)) throw DataError("recording sample rate must be positive");
  const std::size_t n = channels.front().size();
  for (const auto& ch : channels) {
    if (ch.size() != n) throw ShapeError("recording channels differ in length");
    for (double v : ch) {
      if (!std::isfinite(v)) throw DataError("recording contains non-finite samples");
    }
  }
}

Recording Recording::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > n_samples()) throw ShapeError("recording slice out of range");
  Recording out;
  out.fs = fs;
  out.channels.reserve(channels.size());
  for (const auto& ch : channels) {
    out.channels.emplace_back(ch.begin() + begin, ch.begin() + begin + count);
  }
  return out;
}

Recording make_recording(std::size_t n_channels, std::size_t n_samples, double fs) {
  Recording r;
  r.fs = fs;
  r.channels.assign(n_channels, std::vector<double>(n_samples, 0.0));
  return r;
}

void ChirpSpec::validate() const {
  if (!(fs > 0.0)) throw ConfigError("chirp: fs must be positive");
  if (!(f_lo > 0.0)) throw ConfigError("chirp: f_lo must be > 0");
  if (!(f_lo < f_hi)) throw ConfigError("chirp: f_lo must be < f_hi");
  if (!(f_hi < fs / 2.0)) {
    throw ConfigError("chirp: f_hi must be < fs/2 (" + std::to_string(fs / 2.0) + " Hz)");
  }
  if (n_samples < 2) throw ConfigError("chirp: n_samples must be >= 2");
  if (!(amplitude > 0.0 && amplitude <= 1.0)) {
    throw ConfigError("chirp: amplitude must lie in (0, 1]");
  }
}

Waveform generate_chirp(const ChirpSpec& spec) {
  spec.validate();
  Waveform w;
  w.fs = spec.fs;
  w.samples.resize(spec.n_samples);
  const double period = spec.frame_duration();
  const double sweep = spec.bandwidth();
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const double t = static_cast<double>(i) / spec.fs;
    const double phase = spec.f_lo * t + sweep * t * t / (2.0 * period);
    w.samples[i] = spec.amplitude * std::sin(2.0 * std::numbers::pi * phase);
  }
  return w;
}

double chirp_instantaneous_frequency(const ChirpSpec& spec, double i) {
  return spec.f_lo + spec.bandwidth() * i / static_cast<double>(spec.n_samples);
}

}  // namespace echoface::fmcw
