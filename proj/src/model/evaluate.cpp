#include "echoface/model/evaluate.hpp"

#include <ostream>

namespace echoface::model {

SessionPrediction predict_full(const Model& m, const SessionData& s) {
  SessionPrediction p;
  p.session_id = s.session_id;
  p.first_frame = s.shape.n_frames;
  p.pred = m.expand(m.predict_session(s));
  p.gt = s.gt.bottomRows(static_cast<Eigen::Index>(s.n_windows()));
  return p;
}

face::MetricReport evaluate_session(const Model& m, const SessionData& s) {
  const auto p = predict_full(m, s);
  return face::evaluate(p.pred, p.gt);
}

face::MetricReport mean_report(std::span<const face::MetricReport> reports) {
  face::MetricReport out;
  if (reports.empty()) return out;
  const double n = static_cast<double>(reports.size());
  std::array<std::size_t, face::kNumBuckets> with_frames{};
  for (const auto& r : reports) {
    out.frames += r.frames;
    out.mae += r.mae / n;
    out.lmae += r.lmae / n;
    out.umae += r.umae / n;
    out.pl40 += r.pl40 / n;
    out.pu60 += r.pu60 / n;
    for (std::size_t b = 0; b < face::kNumBuckets; ++b) {
      const auto& src = r.buckets[b];
      auto& dst = out.buckets[b];
      dst.frames += src.frames;
      if (src.frames == 0) continue;
      ++with_frames[b];
      dst.mae += src.mae;
      dst.lmae += src.lmae;
      dst.umae += src.umae;
      dst.fraction += src.fraction;
    }
  }
  for (std::size_t b = 0; b < face::kNumBuckets; ++b) {
    auto& dst = out.buckets[b];
    if (with_frames[b] == 0) continue;
    const double k = static_cast<double>(with_frames[b]);
    dst.mae /= k;
    dst.lmae /= k;
    dst.umae /= k;
    dst.fraction = out.frames ? static_cast<double>(dst.frames) / static_cast<double>(out.frames) : 0.0;
  }
  return out;
}

void write_report_csv_header(std::ostream& os) {
  os << "label,frames,mae,lmae,umae,pl40,pu60";
  for (const auto& label : face::kBucketLabels)
    os << ",frames_" << label << ",mae_" << label << ",lmae_" << label << ",umae_" << label;
  os << '\n';
}

void write_report_csv_row(std::ostream& os, const std::string& label, const face::MetricReport& r) {
  os << label << ',' << r.frames << ',' << r.mae << ',' << r.lmae << ',' << r.umae << ',' << r.pl40 << ',' << r.pu60;
  for (const auto& b : r.buckets) os << ',' << b.frames << ',' << b.mae << ',' << b.lmae << ',' << b.umae;
  os << '\n';
}

}  // namespace echoface::model
