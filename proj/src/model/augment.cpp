#include "echoface/model/augment.hpp"

#include <cmath>

#include "echoface/common/error.hpp"
#include "echoface/fmcw/chirp.hpp"
#include "echoface/sim/render.hpp"

namespace echoface::model {

void shift_rows(Eigen::Ref<Eigen::MatrixXd> m, const fmcw::WindowShape& shape, int k) {
  if (std::abs(k) > kMaxVerticalShift)
    throw ConfigError("vertical shift must satisfy |k| <= " + std::to_string(kMaxVerticalShift));
  if (static_cast<std::size_t>(m.rows()) != shape.rows()) throw ShapeError("shift_rows: row count does not match shape");
  if (k == 0) return;
  const auto bins = static_cast<Eigen::Index>(shape.n_bins);
  const Eigen::Index a = std::abs(k);
  for (std::size_t c = 0; c < shape.n_channels; ++c) {
    auto block = m.middleRows(static_cast<Eigen::Index>(c) * bins, bins);
    if (k > 0) {
      for (Eigen::Index r = bins - 1; r >= a; --r) block.row(r) = block.row(r - a);
      block.topRows(a).setZero();
    } else {
      for (Eigen::Index r = 0; r + a < bins; ++r) block.row(r) = block.row(r + a);
      block.bottomRows(a).setZero();
    }
  }
}

DatasetWindow augment_vertical_shift(const DatasetWindow& w, int k) {
  DatasetWindow out = w;
  fmcw::WindowShape shape;
  shape.n_bins = w.input.rows() / shape.n_channels;
  shape.n_frames = w.input.cols();
  shift_rows(out.input.values, shape, k);
  return out;
}

DatasetWindow augment_vertical_shift_random(const DatasetWindow& w, int max_k, std::uint64_t seed) {
  if (max_k < 0 || max_k > kMaxVerticalShift) throw ConfigError("max vertical shift out of range");
  std::mt19937_64 rng(seed);
  const int k = static_cast<int>(rng() % static_cast<std::uint64_t>(2 * max_k + 1)) - max_k;
  return augment_vertical_shift(w, k);
}

SessionData shift_session(const SessionData& s, int k) {
  SessionData out = s;
  shift_rows(out.columns, s.shape, k);
  return out;
}

MotionBank::MotionBank(Eigen::MatrixXd columns) : columns_(std::move(columns)) {}

void MotionBank::add_excerpt(Eigen::Ref<Eigen::MatrixXd> out, double scale, std::mt19937_64& rng) const {
  if (empty()) throw ConfigError("motion bank is empty");
  if (out.rows() != columns_.rows()) throw ShapeError("motion bank rows do not match the window");
  if (out.cols() > columns_.cols()) throw ShapeError("motion bank is shorter than one window");
  const auto span = static_cast<std::uint64_t>(columns_.cols() - out.cols() + 1);
  const auto start = static_cast<Eigen::Index>(rng() % span);
  if (scale == 0.0) return;
  out += scale * columns_.middleCols(start, out.cols());
}

MotionBank make_motion_bank(const fmcw::PipelineConfig& config, double seconds, std::uint64_t seed, double sway_m) {
  const double rate = config.chirp.frame_rate();
  const auto n = static_cast<Eigen::Index>(std::ceil(seconds * rate));
  if (n < static_cast<Eigen::Index>(config.window.n_frames) + 2) throw ConfigError("motion bank duration too short");

  // Smoothed random walk, squashed into [0, 1000] and driving one parameter
  // that every reflector follows with the same gain.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> step(0.0, 1.0);
  Eigen::VectorXd walk(n);
  double x = 0.0, v = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    v = 0.97 * v + 0.03 * step(rng);
    x = 0.995 * x + v;
    walk[i] = x;
  }
  const double lo = walk.minCoeff(), hi = walk.maxCoeff();
  sim::Trajectory traj;
  traj.frame_rate = rate;
  traj.frames = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(face::kNumBlendshapes));
  if (hi > lo) traj.frames.col(0) = ((walk.array() - lo) / (hi - lo) * 1000.0).matrix();

  const sim::Scene base = sim::default_scene();
  std::vector<sim::Reflector> refl = base.reflectors;
  for (auto& r : refl) {
    r.mix.fill(0.0);
    r.mix[0] = 1.0;
    r.gain = sway_m;
  }
  const auto rec = sim::render_reflectors(refl, traj, fmcw::generate_chirp(config.chirp), base.received_gain);
  auto processed = fmcw::process_recording(rec, config);
  return MotionBank(processed.columns.rightCols(processed.columns.cols() - 1));
}

DatasetWindow augment_motion(const DatasetWindow& w, const MotionBank& bank, double scale, std::uint64_t seed) {
  DatasetWindow out = w;
  std::mt19937_64 rng(seed);
  bank.add_excerpt(out.input.values, scale, rng);
  return out;
}

SessionData overlay_motion(const SessionData& s, const MotionBank& bank, double scale, std::uint64_t seed) {
  if (bank.empty()) throw ConfigError("motion bank is empty");
  if (bank.rows() != s.shape.rows()) throw ShapeError("motion bank rows do not match the session");
  SessionData out = s;
  std::mt19937_64 rng(seed);
  const auto n = static_cast<Eigen::Index>(bank.n_columns());
  Eigen::Index j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
  for (Eigen::Index c = 1; c < out.columns.cols(); ++c, j = (j + 1) % n) out.columns.col(c) += scale * bank.columns().col(j);
  return out;
}

}  // namespace echoface::model
