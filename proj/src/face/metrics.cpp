#include "echoface/face/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "echoface/common/error.hpp"

namespace echoface::face {

namespace {
void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != kNumBlendshapes || b.size() != kNumBlendshapes) {
    throw ShapeError("blendshape vectors must have 52 entries (got " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + ")");
  }
}
}  // namespace

double part_mae(std::span<const double> pred, std::span<const double> gt, Part part) {
  check_pair(pred, gt);
  const auto idx = part_indices(part);
  double s = 0.0;
  for (auto i : idx) s += std::abs(pred[i] - gt[i]);
  return s / static_cast<double>(idx.size());
}

double mae(std::span<const double> pred, std::span<const double> gt) { return part_mae(pred, gt, Part::kAll); }
double lmae(std::span<const double> pred, std::span<const double> gt) { return part_mae(pred, gt, Part::kLower); }
double umae(std::span<const double> pred, std::span<const double> gt) { return part_mae(pred, gt, Part::kUpper); }

double percent_below(std::span<const double> values, double threshold) {
  if (values.empty()) throw DataError("percentage of frames is undefined for an empty sequence");
  std::size_t n = 0;
  for (double v : values) n += (v < threshold) ? 1 : 0;
  return 100.0 * static_cast<double>(n) / static_cast<double>(values.size());
}

double pl40(std::span<const double> frame_lmaes) { return percent_below(frame_lmaes, kLowerThreshold); }
double pu60(std::span<const double> frame_umaes) { return percent_below(frame_umaes, kUpperThreshold); }

double part_degree(std::span<const double> v, Part part) {
  if (v.size() != kNumBlendshapes) throw ShapeError("blendshape vector must have 52 entries");
  const auto idx = part_indices(part);
  double s = 0.0;
  for (auto i : idx) s += v[i];
  return s / static_cast<double>(idx.size());
}

double deformation_degree(std::span<const double> v) { return part_degree(v, Part::kAll); }

std::size_t bucket_of(double degree) {
  if (degree < 50.0) return 0;
  if (degree < 100.0) return 1;
  if (degree < 150.0) return 2;
  return 3;
}

DegreeHistogram bucketize(std::span<const double> degrees) {
  DegreeHistogram h;
  for (double d : degrees) ++h.counts[bucket_of(d)];
  h.total = degrees.size();
  if (h.total > 0)
    for (std::size_t b = 0; b < kNumBuckets; ++b) h.fractions[b] = static_cast<double>(h.counts[b]) / h.total;
  return h;
}

FrameErrors frame_errors(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != static_cast<Eigen::Index>(kNumBlendshapes) ||
      gt.cols() != static_cast<Eigen::Index>(kNumBlendshapes)) {
    throw ShapeError("frame_errors: prediction and ground truth must both be F x 52");
  }
  FrameErrors e;
  const auto f = static_cast<std::size_t>(pred.rows());
  e.mae.resize(f);
  e.lmae.resize(f);
  e.umae.resize(f);
  e.gt_degree.resize(f);
  BlendshapeVector p{}, g{};
  for (std::size_t r = 0; r < f; ++r) {
    for (std::size_t c = 0; c < kNumBlendshapes; ++c) {
      p[c] = pred(r, c);
      g[c] = gt(r, c);
    }
    e.mae[r] = mae(p, g);
    e.lmae[r] = lmae(p, g);
    e.umae[r] = umae(p, g);
    e.gt_degree[r] = deformation_degree(g);
  }
  return e;
}

MetricReport summarize(const FrameErrors& e) {
  MetricReport r;
  r.frames = e.mae.size();
  if (r.frames == 0) throw DataError("cannot summarize zero frames");
  for (std::size_t i = 0; i < r.frames; ++i) {
    r.mae += e.mae[i];
    r.lmae += e.lmae[i];
    r.umae += e.umae[i];
    auto& b = r.buckets[bucket_of(e.gt_degree[i])];
    ++b.frames;
    b.mae += e.mae[i];
    b.lmae += e.lmae[i];
    b.umae += e.umae[i];
  }
  const double n = static_cast<double>(r.frames);
  r.mae /= n;
  r.lmae /= n;
  r.umae /= n;
  r.pl40 = pl40(e.lmae);
  r.pu60 = pu60(e.umae);
  for (auto& b : r.buckets) {
    b.fraction = static_cast<double>(b.frames) / n;
    if (b.frames > 0) {
      b.mae /= b.frames;
      b.lmae /= b.frames;
      b.umae /= b.frames;
    }
  }
  return r;
}

MetricReport evaluate(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  return summarize(frame_errors(pred, gt));
}

MetricReport combine(std::span<const MetricReport> reports) {
  MetricReport out;
  double pl = 0.0, pu = 0.0;
  for (const auto& r : reports) {
    const double n = static_cast<double>(r.frames);
    out.frames += r.frames;
    out.mae += r.mae * n;
    out.lmae += r.lmae * n;
    out.umae += r.umae * n;
    pl += r.pl40 * n;
    pu += r.pu60 * n;
    for (std::size_t b = 0; b < kNumBuckets; ++b) {
      const double m = static_cast<double>(r.buckets[b].frames);
      out.buckets[b].frames += r.buckets[b].frames;
      out.buckets[b].mae += r.buckets[b].mae * m;
      out.buckets[b].lmae += r.buckets[b].lmae * m;
      out.buckets[b].umae += r.buckets[b].umae * m;
    }
  }
  if (out.frames == 0) throw DataError("cannot combine empty reports");
  const double n = static_cast<double>(out.frames);
  out.mae /= n;
  out.lmae /= n;
  out.umae /= n;
  out.pl40 = pl / n;
  out.pu60 = pu / n;
  for (auto& b : out.buckets) {
    b.fraction = static_cast<double>(b.frames) / n;
    if (b.frames > 0) {
      b.mae /= b.frames;
      b.lmae /= b.frames;
      b.umae /= b.frames;
    }
  }
  return out;
}

void write_report_text(std::ostream& os, const MetricReport& r) {
  const auto flags = os.flags();
  os << std::fixed << std::setprecision(2);
  os << "frames " << r.frames << "\n";
  os << "MAE  " << r.mae << "\nLMAE " << r.lmae << "\nUMAE " << r.umae << "\n";
  os << "PL40 " << r.pl40 << "%\nPU60 " << r.pu60 << "%\n";
  os << "degree   frames   share    MAE     LMAE    UMAE\n";
  for (std::size_t b = 0; b < kNumBuckets; ++b) {
    const auto& row = r.buckets[b];
    os << std::left << std::setw(9) << kBucketLabels[b] << std::right << std::setw(6) << row.frames << "  "
       << std::setw(6) << 100.0 * row.fraction << "%  " << std::setw(6) << row.mae << "  " << std::setw(6) << row.lmae
       << "  " << std::setw(6) << row.umae << "\n";
  }
  os.flags(flags);
}

}  // namespace echoface::face
