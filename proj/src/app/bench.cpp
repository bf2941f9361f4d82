#include "echoface/app/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "echoface/common/error.hpp"
#include "echoface/wire/quantize.hpp"

namespace echoface::app {

namespace {

using Clock = std::chrono::steady_clock;

nlohmann::json stats_json(const LatencyStats& s) {
  return {{"n", s.n}, {"mean_ms", s.mean}, {"p50_ms", s.p50}, {"p95_ms", s.p95}, {"p99_ms", s.p99}, {"max_ms", s.max}};
}

LatencyStats time_inference(const fmcw::ProcessedSession& p, const model::Model& m, std::size_t limit) {
  std::vector<double> ms;
  fmcw::EchoWindow w;
  for (std::size_t k = p.first_window_frame(); k < p.n_frames() && ms.size() < limit; ++k) {
    w.values = p.window_at(k);
    const auto t0 = Clock::now();
    const auto out = m.predict(w);
    ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    if (!std::isfinite(out[0])) throw DataError("bench: non-finite prediction");
  }
  return latency_stats(std::move(ms));
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

}  // namespace

LatencyStats latency_stats(std::vector<double> ms) {
  LatencyStats s;
  s.n = ms.size();
  if (ms.empty()) return s;
  std::sort(ms.begin(), ms.end());
  auto rank = [&](double q) {
    const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(ms.size())));
    return ms[std::min(ms.size() - 1, i == 0 ? 0 : i - 1)];
  };
  double sum = 0.0;
  for (double v : ms) sum += v;
  s.mean = sum / static_cast<double>(ms.size());
  s.p50 = rank(0.50);
  s.p95 = rank(0.95);
  s.p99 = rank(0.99);
  s.max = ms.back();
  return s;
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json j = {{"dsp", stats_json(dsp)},
                      {"dsp_frames_per_s", dsp_frames_per_s},
                      {"ridge_inference", stats_json(ridge)},
                      {"stream_dsp", stats_json(stream_dsp)},
                      {"stream_inference", stats_json(stream_inference)},
                      {"stream_predictions_per_s", stream_predictions_per_s},
                      {"stream_frames_per_s", stream_frames_per_s},
                      {"stream_dropped_packets", stream_dropped},
                      {"failures", failures},
                      {"ok", ok()}};
  if (conv) j["conv_inference"] = stats_json(*conv);
  return j;
}

BenchReport run_bench(const fmcw::Recording& signal, const fmcw::PipelineConfig& config, const model::Model& ridge,
                      const model::Model* conv, const BenchBudget& budget, const BenchOptions& opts) {
  if (ridge.config.kind != model::ModelKind::kRidge) throw ConfigError("bench: the stream model must be ridge");
  BenchReport r;

  // DSP stage alone, as the device would feed it.
  const auto rec = wire::requantize(signal);
  std::vector<double> dsp_ms;
  fmcw::FramePipeline pipe(config);
  const std::size_t n = config.chirp.n_samples;
  const std::size_t frames = fmcw::frame_count(rec.n_samples(), n);
  if (frames <= config.window.n_frames) throw DataError("bench: recording shorter than one window");
  std::vector<std::span<const double>> views(rec.n_channels());
  const auto t_all = Clock::now();
  for (std::size_t k = 0; k < frames; ++k) {
    for (std::size_t c = 0; c < views.size(); ++c) views[c] = std::span<const double>(rec.channels[c]).subspan(k * n, n);
    const auto t0 = Clock::now();
    pipe.push_frame(views);
    dsp_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  const double dsp_s = std::chrono::duration<double>(Clock::now() - t_all).count();
  r.dsp = latency_stats(std::move(dsp_ms));
  r.dsp_frames_per_s = static_cast<double>(frames) / dsp_s;

  const auto processed = fmcw::process_recording(rec, config);
  r.ridge = time_inference(processed, ridge, opts.inference_windows);
  if (conv) r.conv = time_inference(processed, *conv, opts.inference_windows);

  const auto st = run_loopback(signal, config, &ridge, opts.stream);
  r.stream_dsp = latency_stats(st.dsp_ms);
  r.stream_inference = latency_stats(st.inference_ms);
  r.stream_predictions_per_s = st.prediction_rate();
  r.stream_frames_per_s = st.frame_rate();
  r.stream_dropped = st.packets_dropped;

  if (r.dsp_frames_per_s < budget.dsp_frames_per_s)
    r.failures.push_back("DSP throughput " + fmt(r.dsp_frames_per_s) + " frames/s < " + fmt(budget.dsp_frames_per_s));
  if (r.dsp.p99 >= budget.dsp_p99_ms)
    r.failures.push_back("DSP p99 " + fmt(r.dsp.p99) + " ms >= " + fmt(budget.dsp_p99_ms) + " ms");
  if (r.ridge.p99 >= budget.ridge_p99_ms)
    r.failures.push_back("ridge inference p99 " + fmt(r.ridge.p99) + " ms >= " + fmt(budget.ridge_p99_ms) + " ms");
  if (r.stream_predictions_per_s < budget.stream_predictions_per_s)
    r.failures.push_back("stream prediction rate " + fmt(r.stream_predictions_per_s) + "/s < " +
                         fmt(budget.stream_predictions_per_s) + "/s");
  return r;
}

void write_bench_text(std::ostream& os, const BenchReport& r, const BenchBudget& b) {
  auto line = [&](const char* name, const LatencyStats& s) {
    os << std::left << std::setw(18) << name << std::right << " n=" << std::setw(6) << s.n << "  p50 " << fmt(s.p50)
       << "  p95 " << fmt(s.p95) << "  p99 " << fmt(s.p99) << "  max " << fmt(s.max) << " ms\n";
  };
  line("dsp", r.dsp);
  line("ridge inference", r.ridge);
  if (r.conv) line("conv inference", *r.conv);
  line("stream dsp", r.stream_dsp);
  line("stream inference", r.stream_inference);
  os << "dsp throughput     " << fmt(r.dsp_frames_per_s) << " frames/s (budget >= " << fmt(b.dsp_frames_per_s) << ")\n";
  os << "stream predictions " << fmt(r.stream_predictions_per_s) << " /s (budget >= " << fmt(b.stream_predictions_per_s)
     << "), frames " << fmt(r.stream_frames_per_s) << " /s, dropped packets " << r.stream_dropped << "\n";
  if (r.ok()) {
    os << "all budgets met\n";
  } else {
    for (const auto& f : r.failures) os << "BUDGET MISSED: " << f << "\n";
  }
}

}  // namespace echoface::app
