#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>

#include "echoface/face/metrics.hpp"
#include "echoface/model/model.hpp"

namespace echoface::model {

/// Predictions (n_windows x 52) aligned with the session's ground truth rows
/// from frame shape.n_frames onward.
struct SessionPrediction {
  std::string session_id;
  Eigen::MatrixXd pred;
  Eigen::MatrixXd gt;
  std::size_t first_frame = 0;
};

SessionPrediction predict_full(const Model& m, const SessionData& s);
face::MetricReport evaluate_session(const Model& m, const SessionData& s);

/// Arithmetic mean of per-fold metrics; bucket rows average the folds that
/// have frames in that bucket. `frames` is the total.
face::MetricReport mean_report(std::span<const face::MetricReport> reports);

/// One CSV row per report: label,frames,mae,lmae,umae,pl40,pu60 and per-bucket
/// frames/mae/lmae/umae.
void write_report_csv_header(std::ostream& os);
void write_report_csv_row(std::ostream& os, const std::string& label, const face::MetricReport& r);

}  // namespace echoface::model
