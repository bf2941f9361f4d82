#include "echoface/fmcw/profile.hpp"

#include <string>

#include "echoface/common/error.hpp"

namespace echoface::fmcw {

std::size_t frame_count(std::size_t n_samples, std::size_t n) {
  if (n == 0) throw ConfigError("frame length must be > 0");
  return n_samples / n;
}

std::vector<std::span<const double>> frame_stream(std::span<const double> x, std::size_t n) {
  const std::size_t count = frame_count(x.size(), n);
  std::vector<std::span<const double>> frames;
  frames.reserve(count);
  for (std::size_t k = 0; k < count; ++k) frames.push_back(x.subspan(k * n, n));
  return frames;
}

DiffProfile differential(const EchoProfile& prev, const EchoProfile& cur) {
  if (prev.values.rows() != cur.values.rows() || prev.values.cols() != cur.values.cols()) {
    throw ShapeError("differential: profile shapes differ");
  }
  if (cur.frame_index != prev.frame_index + 1) {
    throw ShapeError("differential: frames " + std::to_string(prev.frame_index) + " and " +
                     std::to_string(cur.frame_index) + " are not adjacent");
  }
  return {cur.values - prev.values, cur.frame_index};
}

Eigen::MatrixXd truncate_bins(const DiffProfile& p, std::size_t n_bins) {
  if (n_bins > static_cast<std::size_t>(p.values.rows())) {
    throw ConfigError("truncate_bins: n_bins " + std::to_string(n_bins) + " exceeds " +
                      std::to_string(p.values.rows()) + " lags");
  }
  return p.values.topRows(static_cast<Eigen::Index>(n_bins));
}

double bin_to_distance(std::size_t bin, double fs, double speed_of_sound) {
  return static_cast<double>(bin) * (speed_of_sound / fs) / 2.0;
}

double truncation_range(std::size_t n_bins, double fs, double speed_of_sound) {
  return bin_to_distance(n_bins, fs, speed_of_sound);
}

}  // namespace echoface::fmcw
