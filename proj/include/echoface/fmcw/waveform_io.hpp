#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "echoface/fmcw/waveform.hpp"
#include "echoface/fmcw/window.hpp"

namespace echoface::fmcw {

// Sample file layout (little-endian):
//   0  "EEWV"
//   4  version u8 (1)
//   5  channels u8
//   6  bit depth u8: 8 (signed int8, value/127) or 64 (IEEE double)
//   7  reserved u8 (0)
//   8  fs u32
//   12 sample count per channel u64
//   20 interleaved samples ch0, ch1, ...
inline constexpr char kWaveformMagic[4] = {'E', 'E', 'W', 'V'};
inline constexpr std::uint8_t kWaveformVersion = 1;
inline constexpr std::size_t kWaveformHeaderSize = 20;

struct WaveformHeader {
  std::uint8_t version = kWaveformVersion;
  std::uint8_t channels = 0;
  std::uint8_t bit_depth = 64;
  std::uint32_t fs = 0;
  std::uint64_t sample_count = 0;  // per channel
};

struct WriteStats {
  std::uint64_t saturated = 0;  // samples clamped on the 8-bit path
};

WriteStats write_recording(std::ostream& os, const Recording& rec, int bit_depth = 64);
WriteStats write_recording(const std::filesystem::path& path, const Recording& rec, int bit_depth = 64);
Recording read_recording(std::istream& is, WaveformHeader* header = nullptr);
Recording read_recording(const std::filesystem::path& path, WaveformHeader* header = nullptr);
WaveformHeader read_header(std::istream& is);

/// float32 row-major with an 8-byte {rows u32, cols u32} header.
void write_window_binary(std::ostream& os, const EchoWindow& w);
void write_window_binary(const std::filesystem::path& path, const EchoWindow& w);
EchoWindow read_window_binary(std::istream& is);
EchoWindow read_window_binary(const std::filesystem::path& path);
/// One line per row: row index, then the column values.
void write_window_csv(std::ostream& os, const EchoWindow& w);

}  // namespace echoface::fmcw
