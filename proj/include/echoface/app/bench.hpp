#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "echoface/app/stream.hpp"
#include "echoface/fmcw/pipeline.hpp"
#include "echoface/model/model.hpp"

namespace echoface::app {

struct LatencyStats {
  std::size_t n = 0;
  double mean = 0.0, p50 = 0.0, p95 = 0.0, p99 = 0.0, max = 0.0;  // ms
};

/// Nearest-rank percentiles.
LatencyStats latency_stats(std::vector<double> ms);

struct BenchBudget {
  double dsp_frames_per_s = 50000.0 / 600.0;
  double dsp_p99_ms = 12.0;
  double ridge_p99_ms = 1.0;
  double stream_predictions_per_s = 29.0;
};

struct BenchReport {
  LatencyStats dsp;
  double dsp_frames_per_s = 0.0;
  LatencyStats ridge;
  std::optional<LatencyStats> conv;
  LatencyStats stream_dsp, stream_inference;
  double stream_predictions_per_s = 0.0;
  double stream_frames_per_s = 0.0;
  std::uint64_t stream_dropped = 0;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
  nlohmann::json to_json() const;
};

struct BenchOptions {
  /// Inference is timed on this many windows.
  std::size_t inference_windows = 2000;
  StreamConfig stream;
};

/// Times the DSP stage frame by frame, ridge (and optionally conv) inference
/// window by window, and a full loopback stream with the ridge model, then
/// checks the results against `budget`.
BenchReport run_bench(const fmcw::Recording& signal, const fmcw::PipelineConfig& config, const model::Model& ridge,
                      const model::Model* conv = nullptr, const BenchBudget& budget = {},
                      const BenchOptions& opts = {});

void write_bench_text(std::ostream& os, const BenchReport& r, const BenchBudget& budget);

}  // namespace echoface::app
