#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>

#include "echoface/fmcw/pipeline.hpp"
#include "echoface/model/dataset.hpp"

namespace echoface::app {

/// NumPy .npy v1.0, float64 little-endian, C order: m.rows() x m.cols().
void write_npy(const std::filesystem::path& path, const Eigen::MatrixXd& m);
void write_npy(const std::filesystem::path& path, std::span<const std::uint8_t> v);

/// columns.npy (frames x rows: one differential column per frame),
/// gt.npy (frames x 52), valid.npy and meta.json.
void export_dataset_npy(const std::filesystem::path& dir, const model::SessionData& s);

struct PlotOptions {
  /// Heatmap rows are written for every n-th frame.
  std::size_t heatmap_every = 1;
  /// Full echo profiles are written for this many frames spread over the session.
  std::size_t profile_snapshots = 5;
};

/// Runs the pipeline over an aligned recording and writes plot data:
///   lag_energy.csv   lag,distance_m,<channel energies of the full differential profile>
///   diff_heatmap.csv frame,time_s,<truncated differential column>
///   profiles.csv     frame,lag,distance_m,<channel values>
/// Returns the processed session.
fmcw::ProcessedSession process_with_plots(const fmcw::Recording& signal, const fmcw::PipelineConfig& config,
                                          const std::filesystem::path& out_dir, const PlotOptions& opts = {},
                                          std::span<const std::uint8_t> frame_valid = {});

/// Share of differential energy in lags whose one-way distance is at most
/// `range_m` (all channels pooled).
double energy_share_within(const std::filesystem::path& lag_energy_csv, double range_m);

}  // namespace echoface::app
