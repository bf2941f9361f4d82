#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "echoface/fmcw/waveform.hpp"
#include "echoface/wire/quantize.hpp"

namespace echoface::wire {

// Wire layout, little-endian:
//   'E' 'E' | seq u16 | channels u8 | payload_len u16 | payload (int8, interleaved)
inline constexpr std::uint8_t kMagic0 = 'E';
inline constexpr std::uint8_t kMagic1 = 'E';
inline constexpr std::size_t kPacketHeaderSize = 7;
inline constexpr std::size_t kDefaultSamplesPerPacket = 120;  // per channel
inline constexpr std::size_t kReorderWindow = 16;

struct Packet {
  std::uint16_t seq = 0;
  std::uint8_t channels = 2;
  std::vector<std::int8_t> payload;

  std::size_t samples_per_channel() const { return channels ? payload.size() / channels : 0; }
  bool operator==(const Packet&) const = default;
};

void append_packet(std::vector<std::uint8_t>& out, const Packet& p);
std::vector<std::uint8_t> encode_packet(const Packet& p);

struct ParseStats {
  std::uint64_t packets = 0;
  std::uint64_t corrupt = 0;        // bad magic or invalid header; bytes skipped to resync
  std::uint64_t skipped_bytes = 0;
};

/// Incremental byte-stream decoder.
class PacketParser {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Packet> next();
  const ParseStats& stats() const { return stats_; }
  std::size_t pending_bytes() const { return buf_.size() - pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  bool in_garbage_ = false;
  ParseStats stats_;
};

std::vector<Packet> decode_packets(std::span<const std::uint8_t> bytes, ParseStats* stats = nullptr);

/// Splits interleaved codes into packets of `samples_per_packet` frames each
/// (the final packet may be shorter).
std::vector<Packet> packetize(std::span<const std::int8_t> interleaved, std::size_t channels,
                              std::size_t samples_per_packet = kDefaultSamplesPerPacket, std::uint16_t first_seq = 0);
std::vector<Packet> packetize(const fmcw::Recording& rec, std::size_t samples_per_packet = kDefaultSamplesPerPacket,
                              std::uint16_t first_seq = 0, QuantizeStats* stats = nullptr);

/// Run of missing packets, in per-channel sample coordinates.
struct LossInterval {
  std::uint64_t first_sample = 0;
  std::uint64_t n_samples = 0;
  std::uint64_t first_packet = 0;  // unwrapped sequence number
  std::uint64_t n_packets = 0;
};

struct LossReport {
  std::uint64_t received = 0;
  std::uint64_t lost = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t late = 0;       // arrived after being declared lost; discarded
  std::uint64_t reordered = 0;  // arrived out of order but within the window
  std::uint64_t channel_mismatch = 0;
  std::vector<LossInterval> intervals;
};

/// Restores the sample stream from packets delivered in approximately the
/// right order. Packets up to kReorderWindow ahead of the next expected
/// sequence number are held back; once that is exceeded the gap is declared
/// lost and zero-filled with `samples_per_packet` frames per missing packet.
class Depacketizer {
 public:
  explicit Depacketizer(std::size_t channels = 2, std::size_t samples_per_packet = kDefaultSamplesPerPacket,
                        std::size_t reorder_window = kReorderWindow);

  /// Returns the interleaved codes that became contiguous.
  std::span<const std::int8_t> push(const Packet& p);
  /// Releases everything still held back, declaring remaining gaps lost.
  std::span<const std::int8_t> flush();

  const LossReport& report() const { return report_; }
  std::uint64_t samples_emitted() const { return emitted_; }
  std::size_t channels() const { return channels_; }

 private:
  void emit(const Packet& p);
  void emit_gap(std::uint64_t n_packets);
  void drain();
  std::uint64_t unwrap(std::uint16_t seq) const;

  std::size_t channels_;
  std::size_t samples_per_packet_;
  std::size_t window_;
  bool started_ = false;
  std::uint64_t next_ = 0;  // unwrapped sequence number expected next
  std::map<std::uint64_t, Packet> held_;
  std::deque<std::uint64_t> recent_lost_;  // to tell late arrivals from duplicates
  std::vector<std::int8_t> out_;
  std::uint64_t emitted_ = 0;
  LossReport report_;
};

struct DepacketizeResult {
  std::vector<std::int8_t> interleaved;
  std::size_t channels = 2;
  LossReport report;

  fmcw::Recording recording(double fs) const;
};

DepacketizeResult depacketize(std::span<const Packet> packets, std::size_t channels = 2,
                              std::size_t samples_per_packet = kDefaultSamplesPerPacket);

/// 1 for frames untouched by loss, 0 otherwise.
std::vector<std::uint8_t> frame_validity(const LossReport& report, std::uint64_t n_samples, std::size_t frame_len,
                                         std::uint64_t sample_offset = 0);

/// Container file: packets concatenated back to back.
void write_container(const std::filesystem::path& path, std::span<const Packet> packets);
std::vector<Packet> read_container(const std::filesystem::path& path, ParseStats* stats = nullptr);

}  // namespace echoface::wire
