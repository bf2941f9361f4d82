#include "echoface/model/normalization.hpp"

#include <cmath>

#include "echoface/common/error.hpp"

namespace echoface::model {

void NormStats::apply(Eigen::Ref<Eigen::MatrixXd> window) const {
  if (window.rows() != mean.size()) throw ShapeError("normalization statistics do not match the window rows");
  window.colwise() -= mean;
  window.array().colwise() /= scale.array();
}

NormStats NormStats::identity(std::size_t rows) {
  const auto r = static_cast<Eigen::Index>(rows);
  return {Eigen::VectorXd::Zero(r), Eigen::VectorXd::Ones(r)};
}

void RowMoments::add(const RowMoments& other) {
  if (other.count == 0.0) return;
  if (count == 0.0) {
    *this = other;
    return;
  }
  if (sum.size() != other.sum.size()) throw ShapeError("row moments of different heights");
  count += other.count;
  sum += other.sum;
  sum_sq += other.sum_sq;
}

NormStats RowMoments::stats() const {
  if (count < 2.0) throw DataError("normalization needs at least two frames");
  NormStats s;
  s.mean = sum / count;
  const Eigen::ArrayXd var = (sum_sq.array() / count - s.mean.array().square()).max(0.0);
  s.scale = var.sqrt().matrix();
  // Rows that never move keep unit scale.
  const double floor = 1e-12 * std::max(1.0, s.scale.maxCoeff());
  for (Eigen::Index i = 0; i < s.scale.size(); ++i)
    if (s.scale[i] <= floor) s.scale[i] = 1.0;
  return s;
}

RowMoments session_moments(const SessionData& s) {
  RowMoments m;
  if (s.n_frames() < 2) return m;
  const auto cols = s.columns.rightCols(s.columns.cols() - 1);
  m.count = static_cast<double>(cols.cols());
  m.sum = cols.rowwise().sum();
  m.sum_sq = cols.array().square().rowwise().sum().matrix();
  return m;
}

NormStats compute_norm_stats(std::span<const SessionData* const> training) {
  RowMoments total;
  for (const SessionData* s : training) total.add(session_moments(*s));
  return total.stats();
}

}  // namespace echoface::model
