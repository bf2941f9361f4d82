#include "echoface/fmcw/waveform_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "echoface/common/error.hpp"

namespace echoface::fmcw {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError(std::string("truncated file reading ") + what);
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  return is;
}

}  // namespace

WriteStats write_recording(std::ostream& os, const Recording& rec, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 64) throw ConfigError("bit depth must be 8 or 64");
  rec.validate();
  if (rec.n_channels() > 255) throw ConfigError("too many channels for the sample file");
  os.write(kWaveformMagic, 4);
  put<std::uint8_t>(os, kWaveformVersion);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(rec.n_channels()));
  put<std::uint8_t>(os, static_cast<std::uint8_t>(bit_depth));
  put<std::uint8_t>(os, 0);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(std::lround(rec.fs)));
  put<std::uint64_t>(os, rec.n_samples());

  WriteStats stats;
  const std::size_t nch = rec.n_channels();
  const std::size_t n = rec.n_samples();
  if (bit_depth == 64) {
    std::vector<double> buf(nch * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < nch; ++c) buf[i * nch + c] = rec.channels[c][i];
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
  } else {
    std::vector<std::int8_t> buf(nch * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < nch; ++c) {
        const double q = std::round(rec.channels[c][i] * 127.0);
        if (q > 127.0 || q < -127.0) ++stats.saturated;
        buf[i * nch + c] = static_cast<std::int8_t>(std::clamp(q, -127.0, 127.0));
      }
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!os) throw DataError("write failed");
  return stats;
}

WriteStats write_recording(const std::filesystem::path& path, const Recording& rec, int bit_depth) {
  auto os = open_out(path);
  return write_recording(os, rec, bit_depth);
}

WaveformHeader read_header(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4)) throw DataError("truncated sample file header");
  if (std::memcmp(magic, kWaveformMagic, 4) != 0) throw DataError("not a sample file (bad magic)");
  WaveformHeader h;
  h.version = get<std::uint8_t>(is, "version");
  if (h.version != kWaveformVersion) throw DataError("unsupported sample file version " + std::to_string(h.version));
  h.channels = get<std::uint8_t>(is, "channels");
  h.bit_depth = get<std::uint8_t>(is, "bit depth");
  (void)get<std::uint8_t>(is, "reserved");
  h.fs = get<std::uint32_t>(is, "fs");
  h.sample_count = get<std::uint64_t>(is, "sample count");
  if (h.bit_depth != 8 && h.bit_depth != 64) throw DataError("unsupported bit depth " + std::to_string(h.bit_depth));
  if (h.channels == 0 || h.fs == 0) throw DataError("sample file header has zero channels or rate");
  return h;
}

Recording read_recording(std::istream& is, WaveformHeader* header) {
  const WaveformHeader h = read_header(is);
  if (header != nullptr) *header = h;
  const std::size_t nch = h.channels;
  const std::size_t n = h.sample_count;
  Recording rec = make_recording(nch, n, static_cast<double>(h.fs));
  if (h.bit_depth == 64) {
    std::vector<double> buf(nch * n);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double))))
      throw DataError("truncated sample data");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < nch; ++c) rec.channels[c][i] = buf[i * nch + c];
  } else {
    std::vector<std::int8_t> buf(nch * n);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw DataError("truncated sample data");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < nch; ++c) rec.channels[c][i] = buf[i * nch + c] / 127.0;
  }
  return rec;
}

Recording read_recording(const std::filesystem::path& path, WaveformHeader* header) {
  auto is = open_in(path);
  return read_recording(is, header);
}

void write_window_binary(std::ostream& os, const EchoWindow& w) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(w.rows()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(w.cols()));
  std::vector<float> buf(w.rows() * w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c) buf[r * w.cols() + c] = static_cast<float>(w.values(r, c));
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw DataError("write failed");
}

void write_window_binary(const std::filesystem::path& path, const EchoWindow& w) {
  auto os = open_out(path);
  write_window_binary(os, w);
}

EchoWindow read_window_binary(std::istream& is) {
  const auto rows = get<std::uint32_t>(is, "rows");
  const auto cols = get<std::uint32_t>(is, "cols");
  std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
  if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float))))
    throw DataError("truncated window dump");
  EchoWindow w;
  w.values.resize(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) w.values(r, c) = buf[r * cols + c];
  return w;
}

EchoWindow read_window_binary(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_window_binary(is);
}

void write_window_csv(std::ostream& os, const EchoWindow& w) {
  os << "row";
  for (std::size_t c = 0; c < w.cols(); ++c) os << ",f" << (w.current_frame - static_cast<std::int64_t>(w.cols() - 1 - c));
  os << '\n';
  os.precision(9);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    os << r;
    for (std::size_t c = 0; c < w.cols(); ++c) os << ',' << w.values(r, c);
    os << '\n';
  }
}

}  // namespace echoface::fmcw
