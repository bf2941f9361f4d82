#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "echoface/fmcw/waveform.hpp"

namespace echoface::wire {

inline constexpr int kQuantLevels = 127;  // symmetric code, -128 unused

struct QuantizeStats {
  std::uint64_t saturated = 0;  // |x| > 1 (or NaN) before rounding
};

std::int8_t quantize_sample(double x, QuantizeStats* stats = nullptr);
inline double dequantize_sample(std::int8_t q) { return static_cast<double>(q) / kQuantLevels; }

std::vector<std::int8_t> quantize8(std::span<const double> x, QuantizeStats* stats = nullptr);
std::vector<double> dequantize8(std::span<const std::int8_t> q);

/// Interleaved ch0, ch1, ... codes of a recording.
std::vector<std::int8_t> interleave8(const fmcw::Recording& rec, QuantizeStats* stats = nullptr);
fmcw::Recording deinterleave8(std::span<const std::int8_t> codes, std::size_t channels, double fs);
/// Recording after an 8-bit round trip.
fmcw::Recording requantize(const fmcw::Recording& rec, QuantizeStats* stats = nullptr);

/// Raw stream rate in bits per second.
double nominal_bitrate(double fs = 50000.0, int channels = 2, int bits = 8);

}  // namespace echoface::wire
