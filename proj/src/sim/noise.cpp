#include "echoface/sim/noise.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "echoface/common/error.hpp"

namespace echoface::sim {

namespace {
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller on our own uniform source so noise is library-independent.
double gaussian(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double power(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}
}  // namespace

double rms(std::span<const double> x) { return std::sqrt(power(x)); }

fmcw::Recording inject_noise(const fmcw::Recording& x, const NoiseSpec& spec, std::uint64_t seed) {
  spec.validate();
  fmcw::Recording out = x;
  if (!spec.enabled()) return out;
  std::mt19937_64 rng(seed);
  for (auto& ch : out.channels) {
    const double p = power(ch);
    if (spec.white_snr_db && std::isfinite(*spec.white_snr_db)) {
      const double sigma = std::sqrt(p / std::pow(10.0, *spec.white_snr_db / 10.0));
      for (double& v : ch) v += sigma * gaussian(rng);
    }
    if (spec.audible_band) {
      const double f_max = spec.audible_band->f_max;
      std::vector<double> freq(kAudibleTones), phase(kAudibleTones);
      for (int k = 0; k < kAudibleTones; ++k) {
        freq[k] = 20.0 + (f_max - 20.0) * uniform01(rng);
        phase[k] = 2.0 * std::numbers::pi * uniform01(rng);
      }
      std::vector<double> noise(ch.size(), 0.0);
      for (int k = 0; k < kAudibleTones; ++k) {
        const double w = 2.0 * std::numbers::pi * freq[k] / x.fs;
        for (std::size_t n = 0; n < noise.size(); ++n) noise[n] += std::sin(w * static_cast<double>(n) + phase[k]);
      }
      const double pn = power(noise);
      if (pn > 0.0) {
        const double scale = std::sqrt(p / std::pow(10.0, spec.audible_band->snr_db / 10.0) / pn);
        for (std::size_t n = 0; n < ch.size(); ++n) ch[n] += scale * noise[n];
      }
    }
  }
  return out;
}

fmcw::Recording inject_clap(const fmcw::Recording& x, double at_s, std::uint64_t seed, double amplitude_factor,
                            double duration_s) {
  x.validate();
  const auto len = static_cast<std::size_t>(std::lround(duration_s * x.fs));
  if (!(at_s >= 0.0) || std::lround(at_s * x.fs) + len > x.n_samples())
    throw ConfigError("clap time " + std::to_string(at_s) + " s is outside the signal");
  const auto start = static_cast<std::size_t>(std::lround(at_s * x.fs));
  const auto half = static_cast<std::size_t>(std::lround(0.5 * x.fs));
  // Reference level over all channels.
  std::size_t lo = start >= half ? start - half : 0;
  std::size_t hi = start >= half ? start : std::min(x.n_samples(), start + len + half);
  if (start < half) lo = start + len;
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& ch : x.channels) {
    for (std::size_t n = lo; n < hi; ++n) acc += ch[n] * ch[n];
    count += hi > lo ? hi - lo : 0;
  }
  double level = count > 0 ? std::sqrt(acc / static_cast<double>(count)) : 0.0;
  if (level == 0.0) level = 0.01;  // silent input still gets an audible clap
  const double a = amplitude_factor * level;
  fmcw::Recording out = x;
  std::mt19937_64 rng(seed);
  for (std::size_t n = start; n < start + len; ++n) {
    for (auto& ch : out.channels) ch[n] += (rng() & 1U) ? a : -a;
  }
  return out;
}

}  // namespace echoface::sim
