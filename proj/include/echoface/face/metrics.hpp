#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "echoface/face/blendshape.hpp"

namespace echoface::face {

inline constexpr double kLowerThreshold = 40.0;
inline constexpr double kUpperThreshold = 60.0;

/// Mean |pred - gt| over a partition of one 52-vector.
double part_mae(std::span<const double> pred, std::span<const double> gt, Part part);
double mae(std::span<const double> pred, std::span<const double> gt);
double lmae(std::span<const double> pred, std::span<const double> gt);
double umae(std::span<const double> pred, std::span<const double> gt);

/// Percentage of entries strictly below `threshold`. Empty input throws DataError.
double percent_below(std::span<const double> values, double threshold);
double pl40(std::span<const double> frame_lmaes);
double pu60(std::span<const double> frame_umaes);

double deformation_degree(std::span<const double> v);
double part_degree(std::span<const double> v, Part part);

/// Degree buckets: [0,50), [50,100), [100,150), [150,inf).
inline constexpr std::size_t kNumBuckets = 4;
inline constexpr std::array<std::string_view, kNumBuckets> kBucketLabels = {"<50", "50-100", "100-150", ">150"};
std::size_t bucket_of(double degree);

struct DegreeHistogram {
  std::array<std::size_t, kNumBuckets> counts{};
  std::array<double, kNumBuckets> fractions{};
  std::size_t total = 0;
};
DegreeHistogram bucketize(std::span<const double> degrees);

/// Per-frame errors for a prediction/ground-truth pair of F×52 matrices.
struct FrameErrors {
  std::vector<double> mae, lmae, umae, gt_degree;
};
FrameErrors frame_errors(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);

struct BucketRow {
  std::size_t frames = 0;
  double fraction = 0.0;
  double mae = 0.0, lmae = 0.0, umae = 0.0;
};

/// Aggregates over frames. Bucket rows are keyed on the ground-truth degree.
struct MetricReport {
  std::size_t frames = 0;
  double mae = 0.0, lmae = 0.0, umae = 0.0;
  double pl40 = 0.0, pu60 = 0.0;
  std::array<BucketRow, kNumBuckets> buckets{};
};

MetricReport summarize(const FrameErrors& errors);
MetricReport evaluate(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);
/// Frame-weighted combination; PL40/PU60 recombine from counts.
MetricReport combine(std::span<const MetricReport> reports);

void write_report_text(std::ostream& os, const MetricReport& r);

}  // namespace echoface::face
