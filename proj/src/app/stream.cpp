#include "echoface/app/stream.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <random>
#include <thread>

#include "echoface/common/error.hpp"
#include "echoface/wire/quantize.hpp"

namespace echoface::app {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Owns a file descriptor.
struct Fd {
  int fd = -1;
  explicit Fd(int f = -1) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() {
    if (fd >= 0) ::close(fd);
  }
};

[[noreturn]] void sys_fail(const char* what) { throw DataError(std::string(what) + ": " + std::strerror(errno)); }

struct Column {
  Eigen::VectorXd values;
  std::int64_t frame = 0;
};

// Turns the depacketized code stream into frames, marking those that overlap
// a loss interval.
class FrameAssembler {
 public:
  FrameAssembler(const fmcw::PipelineConfig& cfg, BoundedQueue<Column>& out, StreamResult& r)
      : cfg_(cfg), pipe_(cfg), out_(out), r_(r), n_(cfg.chirp.n_samples), channels_(cfg.window.n_channels) {
    buf_.assign(channels_, std::vector<double>(n_));
    views_.resize(channels_);
  }

  void feed(std::span<const std::int8_t> codes, const wire::LossReport& report) {
    for (; seen_intervals_ < report.intervals.size(); ++seen_intervals_) losses_.push_back(report.intervals[seen_intervals_]);
    for (std::size_t i = 0; i + channels_ <= codes.size(); i += channels_) {
      for (std::size_t c = 0; c < channels_; ++c) buf_[c][fill_] = wire::dequantize_sample(codes[i + c]);
      if (++fill_ == n_) frame_done();
    }
  }

 private:
  void frame_done() {
    const std::uint64_t s0 = frame_ * n_, s1 = s0 + n_;
    while (!losses_.empty() && losses_.front().first_sample + losses_.front().n_samples <= s0) losses_.pop_front();
    bool valid = true;
    for (const auto& l : losses_) {
      if (l.first_sample >= s1) break;
      if (l.first_sample + l.n_samples > s0) valid = false;
    }
    const auto t0 = Clock::now();
    for (std::size_t c = 0; c < channels_; ++c) views_[c] = buf_[c];
    const auto step = pipe_.push_frame(views_, valid);
    Column col;
    if (step.diff != nullptr) col.values = fmcw::stack_channels(*step.diff, cfg_.window.n_bins);
    r_.dsp_ms.push_back(ms_since(t0));
    col.frame = static_cast<std::int64_t>(frame_);
    ++r_.frames_processed;
    if (!valid) ++r_.invalid_frames;
    if (step.diff != nullptr) out_.push(std::move(col));
    ++frame_;
    fill_ = 0;
  }

  const fmcw::PipelineConfig& cfg_;
  fmcw::FramePipeline pipe_;
  BoundedQueue<Column>& out_;
  StreamResult& r_;
  std::size_t n_, channels_;
  std::vector<std::vector<double>> buf_;
  std::vector<std::span<const double>> views_;
  std::size_t fill_ = 0;
  std::uint64_t frame_ = 0;
  std::size_t seen_intervals_ = 0;
  std::deque<wire::LossInterval> losses_;
};

class Predictor {
 public:
  Predictor(const model::Model* m, const fmcw::WindowShape& shape, std::size_t every)
      : m_(m), builder_(shape), every_(every) {}

  void push(const Column& c, StreamResult& r, std::vector<face::BlendshapeVector>& rows) {
    builder_.push_column(std::span<const double>(c.values.data(), static_cast<std::size_t>(c.values.size())), c.frame);
    if (!m_ || !builder_.ready() || c.frame % static_cast<std::int64_t>(every_) != 0) return;
    const auto t0 = Clock::now();
    const auto w = builder_.window();
    rows.push_back(m_->predict(*w));
    r.inference_ms.push_back(ms_since(t0));
    r.frames.push_back(c.frame);
  }

 private:
  const model::Model* m_;
  fmcw::WindowBuilder builder_;
  std::size_t every_;
};

void finish(StreamResult& r, const std::vector<face::BlendshapeVector>& rows) {
  r.predictions.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(face::kNumBlendshapes));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < face::kNumBlendshapes; ++j)
      r.predictions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
}

void send_all(int fd, const std::vector<std::uint8_t>& bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t k = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    off += static_cast<std::size_t>(k);
  }
}

}  // namespace

void StreamConfig::validate() const {
  if (samples_per_packet == 0) throw ConfigError("samples_per_packet must be > 0");
  if (predict_every == 0) throw ConfigError("predict_every must be > 0");
  if (!(link_loss >= 0.0 && link_loss < 1.0)) throw ConfigError("link_loss must be in [0,1)");
}

double StreamResult::prediction_rate() const {
  return prediction_span_s > 0.0 && frames.size() > 1 ? static_cast<double>(frames.size() - 1) / prediction_span_s
                                                       : 0.0;
}

double StreamResult::frame_rate() const { return wall_s > 0.0 ? static_cast<double>(frames_processed) / wall_s : 0.0; }

StreamResult run_loopback(const fmcw::Recording& signal, const fmcw::PipelineConfig& config,
                          const model::Model* model, const StreamConfig& sc) {
  sc.validate();
  config.validate();
  signal.validate();
  if (signal.n_channels() != config.window.n_channels) throw ShapeError("stream: channel count mismatch");
  if (model) model->check_window_shape(config.window.rows(), config.window.n_frames);

  Fd listener(::socket(AF_INET, SOCK_STREAM, 0));
  if (listener.fd < 0) sys_fail("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listener.fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) sys_fail("bind");
  if (::listen(listener.fd, 1) < 0) sys_fail("listen");
  socklen_t len = sizeof addr;
  if (::getsockname(listener.fd, reinterpret_cast<sockaddr*>(&addr), &len) < 0) sys_fail("getsockname");

  const auto packets = wire::packetize(signal, sc.samples_per_packet);
  StreamResult r;
  BoundedQueue<wire::Packet> packet_q(sc.packet_queue);
  BoundedQueue<Column> column_q(sc.column_queue);
  std::vector<face::BlendshapeVector> rows;
  std::exception_ptr errors[3];
  const auto t_start = Clock::now();

  std::thread sender([&] {
    try {
      Fd s(::socket(AF_INET, SOCK_STREAM, 0));
      if (s.fd < 0) sys_fail("socket");
      if (::connect(s.fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) sys_fail("connect");
      std::mt19937_64 rng(sc.seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<std::uint8_t> bytes;
      std::uint64_t sample = 0;
      for (const auto& p : packets) {
        if (sc.realtime) {
          const auto due = t_start + std::chrono::duration<double>(static_cast<double>(sample) / signal.fs);
          std::this_thread::sleep_until(std::chrono::time_point_cast<Clock::duration>(due));
        }
        sample += p.samples_per_channel();
        if (sc.link_loss > 0.0 && u(rng) < sc.link_loss) continue;
        bytes.clear();
        wire::append_packet(bytes, p);
        send_all(s.fd, bytes);
        ++r.packets_sent;
      }
      ::shutdown(s.fd, SHUT_WR);
    } catch (...) {
      errors[0] = std::current_exception();
    }
  });

  std::thread capture([&] {
    try {
      Fd c(::accept(listener.fd, nullptr, nullptr));
      if (c.fd < 0) sys_fail("accept");
      wire::PacketParser parser;
      std::vector<std::uint8_t> buf(1 << 16);
      while (true) {
        const ssize_t k = ::recv(c.fd, buf.data(), buf.size(), 0);
        if (k < 0) {
          if (errno == EINTR) continue;
          sys_fail("recv");
        }
        if (k == 0) break;
        parser.feed(std::span(buf.data(), static_cast<std::size_t>(k)));
        while (auto p = parser.next()) {
          ++r.packets_parsed;
          if (!sc.realtime) packet_q.push(std::move(*p));
          else if (packet_q.push_drop_oldest(std::move(*p))) ++r.packets_dropped;
        }
      }
    } catch (...) {
      errors[1] = std::current_exception();
    }
    packet_q.close();
  });

  std::thread dsp([&] {
    try {
      wire::Depacketizer depack(config.window.n_channels, sc.samples_per_packet);
      FrameAssembler frames(config, column_q, r);
      while (auto p = packet_q.pop()) frames.feed(depack.push(*p), depack.report());
      frames.feed(depack.flush(), depack.report());
      r.loss = depack.report();
    } catch (...) {
      errors[2] = std::current_exception();
    }
    column_q.close();
  });

  Predictor predictor(model, config.window, sc.predict_every);
  Clock::time_point first{}, last{};
  while (auto c = column_q.pop()) {
    const auto before = rows.size();
    predictor.push(*c, r, rows);
    if (rows.size() > before) {
      last = Clock::now();
      if (before == 0) first = last;
    }
  }
  sender.join();
  capture.join();
  dsp.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  r.wall_s = std::chrono::duration<double>(Clock::now() - t_start).count();
  r.prediction_span_s = rows.size() > 1 ? std::chrono::duration<double>(last - first).count() : 0.0;
  finish(r, rows);
  return r;
}

StreamResult offline_predictions(const fmcw::Recording& signal, const fmcw::PipelineConfig& config,
                                 const model::Model& model, std::size_t predict_every) {
  if (predict_every == 0) throw ConfigError("predict_every must be > 0");
  const auto processed = fmcw::process_recording(wire::requantize(signal), config);
  StreamResult r;
  std::vector<face::BlendshapeVector> rows;
  fmcw::EchoWindow w;
  for (std::size_t k = processed.first_window_frame(); k < processed.n_frames(); ++k) {
    if (k % predict_every != 0) continue;
    w.values = processed.window_at(k);
    w.current_frame = static_cast<std::int64_t>(k);
    rows.push_back(model.predict(w));
    r.frames.push_back(static_cast<std::int64_t>(k));
  }
  r.frames_processed = processed.n_frames();
  finish(r, rows);
  return r;
}

}  // namespace echoface::app
