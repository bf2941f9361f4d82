#include "echoface/fmcw/pipeline.hpp"

#include <algorithm>
#include <string>

#include "echoface/common/error.hpp"

namespace echoface::fmcw {

void PipelineConfig::validate() const {
  chirp.validate();
  if (filter_enabled) {
    bandpass.validate();
    if (bandpass.fs != chirp.fs) throw ConfigError("pipeline: band-pass and chirp sample rates differ");
  }
  if (window.n_bins > chirp.n_samples) {
    throw ConfigError("pipeline: n_bins " + std::to_string(window.n_bins) + " exceeds " +
                      std::to_string(chirp.n_samples) + " lags");
  }
  if (window.n_channels == 0 || window.n_frames == 0) throw ConfigError("pipeline: empty window shape");
}

PipelineConfig PipelineConfig::for_chirp(const ChirpSpec& chirp) {
  PipelineConfig c;
  c.chirp = chirp;
  c.bandpass = BandpassSpec::for_chirp(chirp);
  return c;
}

namespace {

FilterCoefficients identity_filter(double fs) {
  FilterCoefficients f;
  f.fs = fs;
  return f;
}

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

}  // namespace

FramePipeline::FramePipeline(const PipelineConfig& config)
    : config_((config.validate(), config)),
      filter_(config.filter_enabled ? design_bandpass(config.bandpass) : identity_filter(config.chirp.fs)),
      template_(generate_chirp(config.chirp).samples),
      correlator_(template_),
      builder_(config.window) {
  const std::size_t n = config_.chirp.n_samples;
  if (config_.filter_enabled) {
    history_len_ = config_.filter_history > 0 ? config_.filter_history
                                              : round_up(std::max<std::size_t>(filter_.settling_samples(), n), n);
  }
  history_.assign(config_.window.n_channels, std::vector<double>(history_len_, 0.0));
  scratch_in_.resize(history_len_ + n);
  scratch_out_.resize(history_len_ + n);
  lag_buf_.resize(n);

  if (config_.filter_enabled && config_.template_kind == TemplateKind::kFiltered) {
    // Same arithmetic the pipeline applies to a stationary echo at lag 0.
    const std::vector<double> chirp = template_;
    for (std::size_t j = 0; j < history_len_; ++j) {
      const std::size_t back = history_len_ - j;  // samples before frame start
      scratch_in_[j] = chirp[(n - back % n) % n];
    }
    std::copy(chirp.begin(), chirp.end(), scratch_in_.begin() + static_cast<std::ptrdiff_t>(history_len_));
    SosFilter f(filter_);
    f.process(scratch_in_, scratch_out_);
    template_.assign(scratch_out_.end() - static_cast<std::ptrdiff_t>(n), scratch_out_.end());
    correlator_ = Correlator(template_);
  }
  reset();
}

void FramePipeline::reset() {
  for (auto& h : history_) std::fill(h.begin(), h.end(), 0.0);
  const auto n = static_cast<Eigen::Index>(config_.chirp.n_samples);
  const auto c = static_cast<Eigen::Index>(config_.window.n_channels);
  profile_.values = Eigen::MatrixXd::Zero(n, c);
  prev_profile_.values = Eigen::MatrixXd::Zero(n, c);
  diff_.values = Eigen::MatrixXd::Zero(n, c);
  builder_.reset();
  next_frame_ = 0;
}

void FramePipeline::filter_frame(std::size_t channel, std::span<const double> frame, std::span<double> out) {
  if (!config_.filter_enabled) {
    std::copy(frame.begin(), frame.end(), out.begin());
    return;
  }
  auto& hist = history_[channel];
  if (next_frame_ == 0) {
    // Transmission is continuous, so input before the first frame is taken
    // as the periodic extension of that frame.
    const std::size_t n = frame.size();
    for (std::size_t j = 0; j < history_len_; ++j) hist[j] = frame[(n - (history_len_ - j) % n) % n];
  }
  std::copy(hist.begin(), hist.end(), scratch_in_.begin());
  std::copy(frame.begin(), frame.end(), scratch_in_.begin() + static_cast<std::ptrdiff_t>(history_len_));
  SosFilter f(filter_);
  f.process(scratch_in_, scratch_out_);
  std::copy(scratch_out_.end() - static_cast<std::ptrdiff_t>(frame.size()), scratch_out_.end(), out.begin());
  // Slide history: keep the newest history_len_ inputs.
  std::copy(scratch_in_.end() - static_cast<std::ptrdiff_t>(history_len_), scratch_in_.end(), hist.begin());
}

FramePipeline::Step FramePipeline::push_frame(std::span<const std::span<const double>> channels, bool valid) {
  const std::size_t n = config_.chirp.n_samples;
  if (channels.size() != config_.window.n_channels) {
    throw ShapeError("pipeline: expected " + std::to_string(config_.window.n_channels) + " channels, got " +
                     std::to_string(channels.size()));
  }
  std::swap(prev_profile_, profile_);
  profile_.frame_index = next_frame_;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (channels[c].size() != n) throw ShapeError("pipeline: frame length mismatch");
    filter_frame(c, channels[c], lag_buf_);
    auto col = profile_.values.col(static_cast<Eigen::Index>(c));
    if (valid) {
      correlator_.correlate(lag_buf_, std::span<double>(col.data(), n));
    } else {
      col = prev_profile_.values.col(static_cast<Eigen::Index>(c));
    }
  }
  Step step;
  step.frame_index = next_frame_;
  step.valid = valid;
  step.profile = &profile_;
  if (next_frame_ > 0) {
    // Frame 0 was filtered against a synthetic history, so it only primes the
    // filter and frame 1 becomes the first reference.
    if (next_frame_ == 1) diff_.values.setZero();
    else diff_.values = profile_.values - prev_profile_.values;
    diff_.frame_index = next_frame_;
    builder_.push(diff_);
    step.diff = &diff_;
  }
  ++next_frame_;
  return step;
}

Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>> ProcessedSession::window_at(std::size_t k) const {
  if (k < shape.n_frames || k >= n_frames()) throw ShapeError("window_at: frame out of range");
  const double* base = columns.data() + (k + 1 - shape.n_frames) * columns.rows();
  return {base, columns.rows(), static_cast<Eigen::Index>(shape.n_frames), Eigen::OuterStride<>(columns.rows())};
}

ProcessedSession process_recording(const Recording& signal, const PipelineConfig& config,
                                   std::span<const std::uint8_t> frame_valid, const ProfileSink& sink) {
  if (signal.n_channels() != config.window.n_channels) {
    throw ShapeError("process_recording: recording has " + std::to_string(signal.n_channels()) +
                     " channels, pipeline expects " + std::to_string(config.window.n_channels));
  }
  if (signal.fs != config.chirp.fs) throw ConfigError("process_recording: sample rate mismatch");
  FramePipeline pipe(config);
  const std::size_t n = config.chirp.n_samples;
  const std::size_t frames = frame_count(signal.n_samples(), n);
  if (!frame_valid.empty() && frame_valid.size() < frames) throw ShapeError("process_recording: short validity mask");

  ProcessedSession out;
  out.shape = config.window;
  out.frame_rate = config.chirp.frame_rate();
  out.columns = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(config.window.rows()),
                                      static_cast<Eigen::Index>(frames));
  out.frame_valid.assign(frames, 1);
  std::vector<std::span<const double>> views(signal.n_channels());
  for (std::size_t k = 0; k < frames; ++k) {
    for (std::size_t c = 0; c < views.size(); ++c) {
      views[c] = std::span<const double>(signal.channels[c]).subspan(k * n, n);
    }
    const bool valid = frame_valid.empty() || frame_valid[k] != 0;
    out.frame_valid[k] = valid ? 1 : 0;
    const auto step = pipe.push_frame(views, valid);
    if (step.diff != nullptr) {
      const auto col = stack_channels(*step.diff, config.window.n_bins);
      out.columns.col(static_cast<Eigen::Index>(k)) = col;
    }
    if (sink) sink(step);
  }
  return out;
}

}  // namespace echoface::fmcw
