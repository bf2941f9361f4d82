#pragma once

#include <Eigen/Dense>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <vector>

#include "echoface/fmcw/pipeline.hpp"
#include "echoface/model/model.hpp"
#include "echoface/wire/packet.hpp"

namespace echoface::app {

/// Fixed-capacity FIFO shared by two threads. close() wakes all waiters;
/// pop() then drains what is left and returns nullopt.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

  /// Blocks while full.
  void push(T v) {
    std::unique_lock lk(m_);
    not_full_.wait(lk, [&] { return q_.size() < capacity_ || closed_; });
    if (closed_) return;
    q_.push_back(std::move(v));
    not_empty_.notify_one();
  }
  /// Never blocks; evicts the oldest entry when full. Returns true on eviction.
  bool push_drop_oldest(T v) {
    std::lock_guard lk(m_);
    bool dropped = false;
    if (q_.size() >= capacity_) {
      q_.pop_front();
      dropped = true;
    }
    q_.push_back(std::move(v));
    not_empty_.notify_one();
    return dropped;
  }
  std::optional<T> pop() {
    std::unique_lock lk(m_);
    not_empty_.wait(lk, [&] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    not_full_.notify_one();
    return v;
  }
  void close() {
    std::lock_guard lk(m_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> q_;
  bool closed_ = false;
  std::mutex m_;
  std::condition_variable not_empty_, not_full_;
};

struct StreamConfig {
  std::size_t samples_per_packet = wire::kDefaultSamplesPerPacket;
  /// Parsed packets waiting for decode. In realtime mode the oldest are
  /// dropped when it is full, as a live sensor cannot be paused; a fast
  /// replay blocks instead so TCP flow control slows the sender.
  std::size_t packet_queue = 512;
  /// Differential columns waiting for inference; the DSP stage blocks when full.
  std::size_t column_queue = 1024;
  /// Send at the recording's sample rate instead of as fast as possible.
  bool realtime = false;
  /// Predict on every n-th frame once the window is full.
  std::size_t predict_every = 1;
  /// Packets the sender leaves out, to exercise loss handling.
  double link_loss = 0.0;
  std::uint64_t seed = 1;
  void validate() const;
};

struct StreamResult {
  /// One row per prediction (52 columns) and the frame each window ends at.
  Eigen::MatrixXd predictions;
  std::vector<std::int64_t> frames;
  std::vector<double> dsp_ms;        // per frame
  std::vector<double> inference_ms;  // per prediction
  std::uint64_t packets_sent = 0;
  std::uint64_t packets_parsed = 0;
  std::uint64_t packets_dropped = 0;  // evicted from the packet queue
  std::uint64_t frames_processed = 0;
  std::uint64_t invalid_frames = 0;
  wire::LossReport loss;
  double wall_s = 0.0;
  /// Seconds from the first to the last prediction.
  double prediction_span_s = 0.0;

  double prediction_rate() const;
  double frame_rate() const;
};

/// Replays `signal` over a loopback TCP socket as 8-bit packets and runs
/// capture, DSP and inference as three threads joined by bounded queues.
/// Without a model only the first two stages do work.
StreamResult run_loopback(const fmcw::Recording& signal, const fmcw::PipelineConfig& config,
                          const model::Model* model, const StreamConfig& sc = {});

/// The same predictions computed offline from the 8-bit round-tripped
/// signal, for comparison with a lossless stream.
StreamResult offline_predictions(const fmcw::Recording& signal, const fmcw::PipelineConfig& config,
                                 const model::Model& model, std::size_t predict_every = 1);

}  // namespace echoface::app
