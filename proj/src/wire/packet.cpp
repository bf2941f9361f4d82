#include "echoface/wire/packet.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include "echoface/common/error.hpp"

namespace echoface::wire {

void append_packet(std::vector<std::uint8_t>& out, const Packet& p) {
  if (p.payload.size() > 0xFFFF) throw ShapeError("packet payload exceeds 65535 bytes");
  if (p.channels == 0 || p.payload.size() % p.channels != 0) throw ShapeError("packet payload is not whole sample frames");
  const auto len = static_cast<std::uint16_t>(p.payload.size());
  out.push_back(kMagic0);
  out.push_back(kMagic1);
  out.push_back(static_cast<std::uint8_t>(p.seq & 0xFF));
  out.push_back(static_cast<std::uint8_t>(p.seq >> 8));
  out.push_back(p.channels);
  out.push_back(static_cast<std::uint8_t>(len & 0xFF));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  const auto* b = reinterpret_cast<const std::uint8_t*>(p.payload.data());
  out.insert(out.end(), b, b + p.payload.size());
}

std::vector<std::uint8_t> encode_packet(const Packet& p) {
  std::vector<std::uint8_t> out;
  out.reserve(kPacketHeaderSize + p.payload.size());
  append_packet(out, p);
  return out;
}

void PacketParser::feed(std::span<const std::uint8_t> bytes) {
  if (pos_ > 0 && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Packet> PacketParser::next() {
  while (buf_.size() - pos_ >= kPacketHeaderSize) {
    const std::uint8_t* h = buf_.data() + pos_;
    const std::uint8_t channels = h[4];
    const std::size_t len = static_cast<std::size_t>(h[5]) | (static_cast<std::size_t>(h[6]) << 8);
    const bool header_ok = h[0] == kMagic0 && h[1] == kMagic1 && channels > 0 && len % channels == 0;
    if (!header_ok) {
      if (!in_garbage_) ++stats_.corrupt;
      in_garbage_ = true;
      ++stats_.skipped_bytes;
      ++pos_;
      continue;
    }
    if (buf_.size() - pos_ < kPacketHeaderSize + len) return std::nullopt;
    in_garbage_ = false;
    Packet p;
    p.seq = static_cast<std::uint16_t>(h[2] | (h[3] << 8));
    p.channels = channels;
    p.payload.resize(len);
    std::memcpy(p.payload.data(), h + kPacketHeaderSize, len);
    pos_ += kPacketHeaderSize + len;
    ++stats_.packets;
    return p;
  }
  return std::nullopt;
}

std::vector<Packet> decode_packets(std::span<const std::uint8_t> bytes, ParseStats* stats) {
  PacketParser parser;
  parser.feed(bytes);
  std::vector<Packet> out;
  while (auto p = parser.next()) out.push_back(std::move(*p));
  if (stats != nullptr) {
    *stats = parser.stats();
    if (parser.pending_bytes() > 0) {
      ++stats->corrupt;  // trailing partial packet
      stats->skipped_bytes += parser.pending_bytes();
    }
  }
  return out;
}

std::vector<Packet> packetize(std::span<const std::int8_t> interleaved, std::size_t channels,
                              std::size_t samples_per_packet, std::uint16_t first_seq) {
  if (channels == 0 || channels > 255) throw ConfigError("packetize: channel count must be 1..255");
  if (samples_per_packet == 0 || samples_per_packet * channels > 0xFFFF)
    throw ConfigError("packetize: samples per packet out of range");
  if (interleaved.size() % channels != 0) throw ShapeError("packetize: stream is not whole sample frames");
  const std::size_t step = samples_per_packet * channels;
  std::vector<Packet> out;
  out.reserve((interleaved.size() + step - 1) / step);
  std::uint16_t seq = first_seq;
  for (std::size_t i = 0; i < interleaved.size(); i += step) {
    Packet p;
    p.seq = seq++;
    p.channels = static_cast<std::uint8_t>(channels);
    const std::size_t end = std::min(interleaved.size(), i + step);
    p.payload.assign(interleaved.begin() + static_cast<std::ptrdiff_t>(i), interleaved.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Packet> packetize(const fmcw::Recording& rec, std::size_t samples_per_packet, std::uint16_t first_seq,
                              QuantizeStats* stats) {
  const auto codes = interleave8(rec, stats);
  return packetize(codes, rec.n_channels(), samples_per_packet, first_seq);
}

Depacketizer::Depacketizer(std::size_t channels, std::size_t samples_per_packet, std::size_t reorder_window)
    : channels_(channels), samples_per_packet_(samples_per_packet), window_(reorder_window) {
  if (channels == 0 || samples_per_packet == 0) throw ConfigError("depacketizer: zero channels or packet size");
}

std::uint64_t Depacketizer::unwrap(std::uint16_t seq) const {
  const auto expected16 = static_cast<std::uint16_t>(next_ & 0xFFFF);
  const auto delta = static_cast<std::int16_t>(static_cast<std::uint16_t>(seq - expected16));
  return static_cast<std::uint64_t>(static_cast<std::int64_t>(next_) + delta);
}

void Depacketizer::emit(const Packet& p) {
  out_.insert(out_.end(), p.payload.begin(), p.payload.end());
  emitted_ += p.payload.size() / channels_;
  ++next_;
}

void Depacketizer::emit_gap(std::uint64_t n_packets) {
  const std::uint64_t n_samples = n_packets * samples_per_packet_;
  auto& iv = report_.intervals;
  const bool extends = !iv.empty() && iv.back().first_sample + iv.back().n_samples == emitted_ &&
                       iv.back().first_packet + iv.back().n_packets == next_;
  if (extends) {
    iv.back().n_samples += n_samples;
    iv.back().n_packets += n_packets;
  } else {
    iv.push_back({emitted_, n_samples, next_, n_packets});
  }
  out_.insert(out_.end(), n_samples * channels_, std::int8_t{0});
  emitted_ += n_samples;
  report_.lost += n_packets;
  for (std::uint64_t i = 0; i < n_packets; ++i) {
    recent_lost_.push_back(next_ + i);
    if (recent_lost_.size() > 4 * window_) recent_lost_.pop_front();
  }
  next_ += n_packets;
}

void Depacketizer::drain() {
  while (true) {
    auto it = held_.find(next_);
    if (it != held_.end()) {
      emit(it->second);
      held_.erase(it);
      continue;
    }
    if (held_.empty()) return;
    // A gap; give up on it only once the newest held packet is too far ahead.
    const std::uint64_t newest = held_.rbegin()->first;
    if (newest - next_ < window_) return;
    emit_gap(held_.begin()->first - next_);
  }
}

std::span<const std::int8_t> Depacketizer::push(const Packet& p) {
  out_.clear();
  if (p.channels != channels_) {
    ++report_.channel_mismatch;
    return out_;
  }
  if (!started_) {
    started_ = true;
    next_ = p.seq;
  }
  const std::uint64_t s = unwrap(p.seq);
  if (s < next_) {
    const bool was_lost = std::find(recent_lost_.begin(), recent_lost_.end(), s) != recent_lost_.end();
    ++(was_lost ? report_.late : report_.duplicates);
    return out_;
  }
  if (held_.count(s) != 0) {
    ++report_.duplicates;
    return out_;
  }
  ++report_.received;
  if (!held_.empty() && s < held_.rbegin()->first) ++report_.reordered;
  held_.emplace(s, p);
  drain();
  return out_;
}

std::span<const std::int8_t> Depacketizer::flush() {
  out_.clear();
  while (!held_.empty()) {
    auto it = held_.begin();
    if (it->first != next_) emit_gap(it->first - next_);
    emit(it->second);
    held_.erase(it);
  }
  return out_;
}

fmcw::Recording DepacketizeResult::recording(double fs) const { return deinterleave8(interleaved, channels, fs); }

DepacketizeResult depacketize(std::span<const Packet> packets, std::size_t channels, std::size_t samples_per_packet) {
  Depacketizer d(channels, samples_per_packet);
  DepacketizeResult r;
  r.channels = channels;
  for (const auto& p : packets) {
    auto out = d.push(p);
    r.interleaved.insert(r.interleaved.end(), out.begin(), out.end());
  }
  auto out = d.flush();
  r.interleaved.insert(r.interleaved.end(), out.begin(), out.end());
  r.report = d.report();
  return r;
}

std::vector<std::uint8_t> frame_validity(const LossReport& report, std::uint64_t n_samples, std::size_t frame_len,
                                         std::uint64_t sample_offset) {
  if (frame_len == 0) throw ConfigError("frame_validity: zero frame length");
  const std::uint64_t frames = n_samples / frame_len;
  std::vector<std::uint8_t> valid(frames, 1);
  for (const auto& iv : report.intervals) {
    const std::uint64_t lo = iv.first_sample, hi = iv.first_sample + iv.n_samples;  // [lo, hi)
    if (hi <= sample_offset) continue;
    const std::uint64_t a = lo > sample_offset ? lo - sample_offset : 0;
    const std::uint64_t b = hi - sample_offset;
    for (std::uint64_t f = a / frame_len; f < frames && f * frame_len < b; ++f) valid[f] = 0;
  }
  return valid;
}

void write_container(const std::filesystem::path& path, std::span<const Packet> packets) {
  std::vector<std::uint8_t> bytes;
  for (const auto& p : packets) append_packet(bytes, p);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("write failed: " + path.string());
}

std::vector<Packet> read_container(const std::filesystem::path& path, ParseStats* stats) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_packets(bytes, stats);
}

}  // namespace echoface::wire
