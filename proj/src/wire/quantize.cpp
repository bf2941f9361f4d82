#include "echoface/wire/quantize.hpp"

#include <cmath>

#include "echoface/common/error.hpp"

namespace echoface::wire {

std::int8_t quantize_sample(double x, QuantizeStats* stats) {
  if (std::isnan(x)) {
    if (stats != nullptr) ++stats->saturated;
    return 0;
  }
  if (x > 1.0 || x < -1.0) {
    if (stats != nullptr) ++stats->saturated;
    return x > 0.0 ? kQuantLevels : -kQuantLevels;
  }
  return static_cast<std::int8_t>(std::lround(x * kQuantLevels));
}

std::vector<std::int8_t> quantize8(std::span<const double> x, QuantizeStats* stats) {
  std::vector<std::int8_t> q(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) q[i] = quantize_sample(x[i], stats);
  return q;
}

std::vector<double> dequantize8(std::span<const std::int8_t> q) {
  std::vector<double> x(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) x[i] = dequantize_sample(q[i]);
  return x;
}

std::vector<std::int8_t> interleave8(const fmcw::Recording& rec, QuantizeStats* stats) {
  const std::size_t nch = rec.n_channels();
  const std::size_t n = rec.n_samples();
  std::vector<std::int8_t> out(nch * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < nch; ++c) out[i * nch + c] = quantize_sample(rec.channels[c][i], stats);
  return out;
}

fmcw::Recording deinterleave8(std::span<const std::int8_t> codes, std::size_t channels, double fs) {
  if (channels == 0 || codes.size() % channels != 0) throw ShapeError("interleaved stream length is not a multiple of the channel count");
  const std::size_t n = codes.size() / channels;
  auto rec = fmcw::make_recording(channels, n, fs);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < channels; ++c) rec.channels[c][i] = dequantize_sample(codes[i * channels + c]);
  return rec;
}

fmcw::Recording requantize(const fmcw::Recording& rec, QuantizeStats* stats) {
  fmcw::Recording out = rec;
  for (auto& ch : out.channels)
    for (double& v : ch) v = dequantize_sample(quantize_sample(v, stats));
  return out;
}

double nominal_bitrate(double fs, int channels, int bits) { return fs * channels * bits; }

}  // namespace echoface::wire
