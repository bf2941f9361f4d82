#include "echoface/blink/blink.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include "echoface/common/error.hpp"

namespace echoface::blink {

void ExtractorConfig::validate() const {
  if (!(off_threshold < on_threshold)) throw ConfigError("blink off threshold must lie below the on threshold");
  if (!(min_duration_s >= 0.0 && min_duration_s <= max_duration_s)) throw ConfigError("blink duration bounds are invalid");
  if (!(frame_rate > 0.0)) throw ConfigError("blink extractor needs a positive frame rate");
}

std::vector<double> blink_signal(std::span<const face::BlendshapeVector> frames) {
  std::vector<double> s;
  s.reserve(frames.size());
  for (const auto& f : frames) s.push_back(0.5 * (f[face::kEyeBlinkL] + f[face::kEyeBlinkR]));
  return s;
}

std::vector<double> blink_signal(const Eigen::MatrixXd& frames) {
  if (frames.cols() != static_cast<Eigen::Index>(face::kNumBlendshapes)) throw ShapeError("blink_signal expects 52 columns");
  return blink_signal(Eigen::VectorXd(frames.col(face::kEyeBlinkL)), Eigen::VectorXd(frames.col(face::kEyeBlinkR)));
}

std::vector<double> blink_signal(const Eigen::VectorXd& left, const Eigen::VectorXd& right) {
  if (left.size() != right.size()) throw ShapeError("blink_signal: channel lengths differ");
  std::vector<double> s(static_cast<std::size_t>(left.size()));
  for (Eigen::Index i = 0; i < left.size(); ++i) s[static_cast<std::size_t>(i)] = 0.5 * (left[i] + right[i]);
  return s;
}

std::vector<BlinkEvent> extract_events(std::span<const double> signal, const ExtractorConfig& cfg,
                                       std::int64_t first_frame) {
  cfg.validate();
  std::vector<BlinkEvent> out;
  const double min_frames = cfg.min_duration_s * cfg.frame_rate;
  const double max_frames = cfg.max_duration_s * cfg.frame_rate;
  auto emit = [&](std::size_t onset, std::size_t offset) {
    const double len = static_cast<double>(offset - onset);
    if (len + 1e-9 < min_frames || len > max_frames + 1e-9) return;
    const double peak = *std::max_element(signal.begin() + static_cast<std::ptrdiff_t>(onset),
                                          signal.begin() + static_cast<std::ptrdiff_t>(offset));
    out.push_back({first_frame + static_cast<std::int64_t>(onset), first_frame + static_cast<std::int64_t>(offset), peak});
  };

  bool above_off = false, open = false;
  std::size_t run_start = 0;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const double v = signal[i];
    if (v <= cfg.off_threshold) {
      if (open) emit(run_start, i);
      above_off = open = false;
      continue;
    }
    if (!above_off) {
      above_off = true;
      run_start = i;
    }
    if (v >= cfg.on_threshold) open = true;
  }
  if (open) emit(run_start, signal.size());
  return out;
}

MatchResult match_and_f1(std::span<const BlinkEvent> pred, std::span<const BlinkEvent> gt, double frame_rate,
                         double tolerance_s) {
  const double tol = tolerance_s * frame_rate;
  std::vector<std::tuple<std::int64_t, std::size_t, std::size_t>> pairs;
  for (std::size_t p = 0; p < pred.size(); ++p)
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const std::int64_t d = std::abs(pred[p].onset - gt[g].onset);
      if (static_cast<double>(d) <= tol + 1e-9) pairs.emplace_back(d, p, g);
    }
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> used_p(pred.size(), false), used_g(gt.size(), false);
  MatchResult r;
  for (const auto& [d, p, g] : pairs) {
    if (used_p[p] || used_g[g]) continue;
    used_p[p] = used_g[g] = true;
    ++r.tp;
  }
  r.fp = pred.size() - r.tp;
  r.fn = gt.size() - r.tp;
  std::vector<MatchResult> one{r};
  return merge(one);
}

MatchResult merge(std::span<const MatchResult> parts) {
  MatchResult r;
  for (const auto& p : parts) {
    r.tp += p.tp;
    r.fp += p.fp;
    r.fn += p.fn;
  }
  const double np = static_cast<double>(r.tp + r.fp), ng = static_cast<double>(r.tp + r.fn);
  if (np == 0.0 && ng == 0.0) {
    r.precision = r.recall = r.f1 = 1.0;
    return r;
  }
  r.precision = np > 0.0 ? static_cast<double>(r.tp) / np : 0.0;
  r.recall = ng > 0.0 ? static_cast<double>(r.tp) / ng : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

void write_events_csv(std::ostream& os, std::span<const BlinkEvent> events, double frame_rate) {
  os << "onset_s,offset_s,peak\n";
  os.precision(9);
  for (const auto& e : events)
    os << static_cast<double>(e.onset) / frame_rate << ',' << static_cast<double>(e.offset) / frame_rate << ',' << e.peak
       << '\n';
}

void write_events_csv(const std::filesystem::path& path, std::span<const BlinkEvent> events, double frame_rate) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  write_events_csv(os, events, frame_rate);
}

std::vector<BlinkEvent> read_events_csv(std::istream& is, double frame_rate) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("onset_s,offset_s,peak", 0) != 0) throw DataError("events CSV lacks its header");
  std::vector<BlinkEvent> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    double on = 0, off = 0, peak = 0;
    char c1 = 0, c2 = 0;
    if (!(ss >> on >> c1 >> off >> c2 >> peak) || c1 != ',' || c2 != ',') throw DataError("malformed events CSV row: " + line);
    out.push_back({std::llround(on * frame_rate), std::llround(off * frame_rate), peak});
  }
  return out;
}

}  // namespace echoface::blink
