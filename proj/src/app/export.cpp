#include "echoface/app/export.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "echoface/common/error.hpp"
#include "echoface/face/blendshape.hpp"
#include "echoface/fmcw/profile.hpp"

namespace echoface::app {

namespace fs = std::filesystem;

namespace {

void write_npy_header(std::ostream& os, const char* descr, const std::string& shape) {
  std::string dict = std::string("{'descr': '") + descr + "', 'fortran_order': False, 'shape': " + shape + ", }";
  // Magic (6) + version (2) + header length (2) + dict, padded to 64 bytes.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');
  os.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(dict.size());
  const char l[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  os.write(l, 2);
  os.write(dict.data(), static_cast<std::streamsize>(dict.size()));
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot open " + p.string() + " for writing");
  return os;
}

}  // namespace

void write_npy(const fs::path& path, const Eigen::MatrixXd& m) {
  auto os = open_out(path);
  write_npy_header(os, "<f8", "(" + std::to_string(m.rows()) + ", " + std::to_string(m.cols()) + ")");
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  os.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!os) throw DataError("cannot write " + path.string());
}

void write_npy(const fs::path& path, std::span<const std::uint8_t> v) {
  auto os = open_out(path);
  write_npy_header(os, "|u1", "(" + std::to_string(v.size()) + ",)");
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size()));
  if (!os) throw DataError("cannot write " + path.string());
}

void export_dataset_npy(const fs::path& dir, const model::SessionData& s) {
  s.validate();
  fs::create_directories(dir);
  write_npy(dir / "columns.npy", s.columns.transpose());
  write_npy(dir / "gt.npy", s.gt);
  write_npy(dir / "valid.npy", s.frame_valid);
  const nlohmann::json meta = {{"session_id", s.session_id},
                               {"participant", s.participant},
                               {"frame_rate", s.frame_rate},
                               {"n_bins", s.shape.n_bins},
                               {"n_channels", s.shape.n_channels},
                               {"window_frames", s.shape.n_frames},
                               {"n_frames", s.n_frames()},
                               {"blendshapes", face::kBlendshapeNames}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
}

fmcw::ProcessedSession process_with_plots(const fmcw::Recording& signal, const fmcw::PipelineConfig& config,
                                          const fs::path& out_dir, const PlotOptions& opts,
                                          std::span<const std::uint8_t> frame_valid) {
  if (opts.heatmap_every == 0) throw ConfigError("heatmap_every must be > 0");
  fs::create_directories(out_dir);
  const std::size_t frames = fmcw::frame_count(signal.n_samples(), config.chirp.n_samples);
  std::vector<std::size_t> snapshots;
  for (std::size_t i = 0; i < opts.profile_snapshots && frames > 0; ++i)
    snapshots.push_back(opts.profile_snapshots == 1 ? 0 : i * (frames - 1) / (opts.profile_snapshots - 1));

  auto profiles = open_out(out_dir / "profiles.csv");
  profiles << "frame,lag,distance_m";
  for (std::size_t c = 0; c < signal.n_channels(); ++c) profiles << ",ch" << c;
  profiles << '\n' << std::setprecision(9);
  Eigen::MatrixXd energy;
  std::size_t next_snapshot = 0;

  const auto processed = fmcw::process_recording(signal, config, frame_valid, [&](const fmcw::FramePipeline::Step& s) {
    const auto k = static_cast<std::size_t>(s.frame_index);
    if (s.diff) {
      const Eigen::MatrixXd sq = s.diff->values.array().square();
      if (energy.size() == 0) energy = Eigen::MatrixXd::Zero(sq.rows(), sq.cols());
      energy += sq;
    }
    while (next_snapshot < snapshots.size() && snapshots[next_snapshot] < k) ++next_snapshot;
    if (next_snapshot < snapshots.size() && snapshots[next_snapshot] == k) {
      const auto& v = s.profile->values;
      for (Eigen::Index l = 0; l < v.rows(); ++l) {
        profiles << k << ',' << l << ',' << fmcw::bin_to_distance(static_cast<std::size_t>(l), config.chirp.fs);
        for (Eigen::Index c = 0; c < v.cols(); ++c) profiles << ',' << v(l, c);
        profiles << '\n';
      }
      ++next_snapshot;
    }
  });

  auto lag = open_out(out_dir / "lag_energy.csv");
  lag << "lag,distance_m";
  for (std::size_t c = 0; c < signal.n_channels(); ++c) lag << ",ch" << c;
  lag << '\n' << std::setprecision(12);
  for (Eigen::Index l = 0; l < energy.rows(); ++l) {
    lag << l << ',' << fmcw::bin_to_distance(static_cast<std::size_t>(l), config.chirp.fs);
    for (Eigen::Index c = 0; c < energy.cols(); ++c) lag << ',' << energy(l, c);
    lag << '\n';
  }

  auto heat = open_out(out_dir / "diff_heatmap.csv");
  heat << "frame,time_s";
  for (std::size_t c = 0; c < config.window.n_channels; ++c)
    for (std::size_t b = 0; b < config.window.n_bins; ++b) heat << ",ch" << c << "_bin" << b;
  heat << '\n' << std::setprecision(9);
  for (std::size_t k = 1; k < processed.n_frames(); k += opts.heatmap_every) {
    heat << k << ',' << static_cast<double>(k) / processed.frame_rate;
    for (Eigen::Index r = 0; r < processed.columns.rows(); ++r) heat << ',' << processed.columns(r, static_cast<Eigen::Index>(k));
    heat << '\n';
  }
  if (!profiles || !lag || !heat) throw DataError("cannot write plot data under " + out_dir.string());
  return processed;
}

double energy_share_within(const fs::path& lag_energy_csv, double range_m) {
  std::ifstream is(lag_energy_csv);
  if (!is) throw DataError("cannot read " + lag_energy_csv.string());
  std::string line;
  std::getline(is, line);
  double inside = 0.0, total = 0.0;
  while (std::getline(is, line)) {
    std::istringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    const double d = std::stod(cell);
    double e = 0.0;
    while (std::getline(ss, cell, ',')) e += std::stod(cell);
    total += e;
    if (d <= range_m) inside += e;
  }
  return total > 0.0 ? inside / total : 0.0;
}

}  // namespace echoface::app
