#include "echoface/wire/clap.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "echoface/common/error.hpp"

namespace echoface::wire {

std::optional<std::size_t> detect_clap(const fmcw::Recording& x, const ClapDetectorConfig& cfg) {
  x.validate();
  const auto win = static_cast<std::size_t>(std::lround(cfg.window_s * x.fs));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_s * x.fs));
  const auto base = static_cast<std::size_t>(std::lround(cfg.baseline_s * x.fs));
  if (win == 0 || hop == 0 || base < win) throw ConfigError("clap detector: window, hop or baseline too small");
  const std::size_t n = x.n_samples();
  if (n < base) throw DataError("clap detection needs at least " + std::to_string(cfg.baseline_s) + " s of signal");

  // Prefix sums of pooled energy.
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double e = 0.0;
    for (const auto& ch : x.channels) e += ch[i] * ch[i];
    cum[i + 1] = cum[i] + e;
  }
  const double norm = 1.0 / static_cast<double>(win * x.n_channels());
  auto window_rms = [&](std::size_t s) { return std::sqrt(std::max(0.0, cum[s + win] - cum[s]) * norm); };

  const std::size_t n_base = base / win;
  std::vector<double> levels(n_base);
  for (std::size_t s = base; s + win <= n; s += hop) {
    const double r = window_rms(s);
    if (r == 0.0) continue;
    for (std::size_t i = 0; i < n_base; ++i) levels[i] = window_rms(s - base + i * win);
    auto mid = levels.begin() + static_cast<std::ptrdiff_t>(n_base / 2);
    std::nth_element(levels.begin(), mid, levels.end());
    double median = *mid;
    if (n_base % 2 == 0) median = 0.5 * (median + *std::max_element(levels.begin(), mid));
    if (r > cfg.threshold * median) return s;
  }
  return std::nullopt;
}

std::optional<std::size_t> detect_clap(const fmcw::Waveform& x, const ClapDetectorConfig& cfg) {
  fmcw::Recording r;
  r.channels = {x.samples};
  r.fs = x.fs;
  return detect_clap(r, cfg);
}

}  // namespace echoface::wire
