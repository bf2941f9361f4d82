#include <doctest.h>

#include <cmath>
#include <random>

#include "echoface/common/error.hpp"
#include "echoface/face/metrics.hpp"
#include "echoface/fmcw/correlator.hpp"
#include "echoface/fmcw/pipeline.hpp"
#include "echoface/sim/noise.hpp"
#include "echoface/sim/render.hpp"
#include "echoface/sim/scene.hpp"
#include "echoface/sim/session.hpp"
#include "echoface/sim/trajectory.hpp"

using namespace echoface;
using namespace echoface::sim;

namespace {

fmcw::ProcessedSession process(const fmcw::Recording& r, const fmcw::ChirpSpec& chirp = {}) {
  return fmcw::process_recording(r, fmcw::PipelineConfig::for_chirp(chirp));
}

std::size_t lag_of_last_frame(const fmcw::Recording& rec, const fmcw::ChirpSpec& chirp) {
  fmcw::FramePipeline p(fmcw::PipelineConfig::for_chirp(chirp));
  std::size_t lag = 0;
  const std::size_t n = chirp.n_samples;
  for (std::size_t k = 0; k < rec.n_samples() / n; ++k) {
    std::vector<std::span<const double>> v = {std::span(rec.channels[0]).subspan(k * n, n),
                                              std::span(rec.channels[1]).subspan(k * n, n)};
    const auto s = p.push_frame(v);
    lag = fmcw::peak_lag(std::span<const double>(s.profile->values.col(0).data(), n));
  }
  return lag;
}

Trajectory steady_motion(std::size_t frames, std::size_t param, double amplitude, double period_frames) {
  auto t = neutral_trajectory(frames, 50000.0 / 600.0);
  for (std::size_t k = 0; k < frames; ++k)
    t.frames(k, param) = amplitude * (0.5 - 0.5 * std::cos(2 * 3.141592653589793 * k / period_frames));
  return t;
}

}  // namespace

TEST_CASE("single reflector at 0.17 m lands on lag 50") {
  const fmcw::ChirpSpec chirp;
  const auto rec = render_received(single_reflector_scene(0.17), neutral_trajectory(4, chirp.frame_rate()),
                                   fmcw::generate_chirp(chirp));
  CHECK(lag_of_last_frame(rec, chirp) == 50);
  const auto ps = process(rec);
  CHECK(ps.columns.isZero(0.0));
}

TEST_CASE("fractional delays keep the echo on the nearest lag in both bands") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> frac(0.1, 0.4);
  for (const auto& chirp : {fmcw::ChirpSpec{}, fmcw::ChirpSpec::high_band()}) {
    CAPTURE(chirp.f_lo);
    const auto tx = fmcw::generate_chirp(chirp);
    for (int t = 0; t < 12; ++t) {
      // Delays a few tenths of a sample off the grid, either side.
      const double lag = 20.0 + 37.0 * t + (t % 2 ? frac(rng) : 1.0 - frac(rng));
      const double d = lag * fmcw::kSpeedOfSound / (2.0 * chirp.fs);
      const auto rec = render_received(single_reflector_scene(d), neutral_trajectory(6, chirp.frame_rate()), tx);
      CAPTURE(lag);
      CHECK(lag_of_last_frame(rec, chirp) == static_cast<std::size_t>(std::lround(lag)));
    }
  }
}

TEST_CASE("static default scene yields exactly zero differential profiles") {
  for (const auto& chirp : {fmcw::ChirpSpec{}, fmcw::ChirpSpec::high_band()}) {
    Scene scene = default_scene();
    scene.clap_times.clear();
    const auto rec = render_received(scene, neutral_trajectory(30, chirp.frame_rate()), fmcw::generate_chirp(chirp));
    const auto ps = process(rec, chirp);
    CHECK(ps.columns.isZero(0.0));
  }
}

TEST_CASE("one-sided motion stays in its channel") {
  Scene scene = default_scene();
  scene.clap_times.clear();
  for (auto& r : scene.reflectors)
    if (r.channel == 1) r.gain = 0.0;
  const auto traj = steady_motion(200, face::require_index("jawOpen"), 400.0, 50.0);
  const auto ps = process(render_received(scene, traj, fmcw::generate_chirp({})));
  const double e0 = ps.columns.topRows(30).squaredNorm();
  const double e1 = ps.columns.bottomRows(30).squaredNorm();
  CHECK(e0 > 0.0);
  CHECK(e0 >= 5.0 * e1);
}

TEST_CASE("moving reflector energy concentrates near its bin") {
  Scene scene = single_reflector_scene(0.05);
  scene.reflectors[0].gain = 0.002;
  scene.reflectors[0].mix[face::require_index("jawOpen")] = 1.0;
  const auto traj = steady_motion(120, face::require_index("jawOpen"), 1000.0, 40.0);
  const auto rec = render_received(scene, traj, fmcw::generate_chirp({}));
  fmcw::PipelineConfig cfg = fmcw::PipelineConfig::for_chirp({});
  cfg.window.n_bins = 600;
  const auto ps = fmcw::process_recording(rec, cfg);
  const auto bin = static_cast<Eigen::Index>(std::lround(2 * 0.05 * 50000 / 340.0));  // 15
  const Eigen::VectorXd energy = ps.columns.rowwise().squaredNorm();
  Eigen::Index peak = 0;
  energy.maxCoeff(&peak);
  CHECK(std::abs(peak - bin) <= 2);
  // 5 of 600 bins hold over a quarter of the energy; the rest is the
  // correlation main lobe (about fs / bandwidth = 12.5 lags wide).
  CHECK(energy.segment(bin - 2, 5).sum() > 0.25 * energy.sum());
  CHECK(energy.segment(bin - 7, 15).sum() > 0.7 * energy.sum());
}

TEST_CASE("rendering superposes reflector sets") {
  const fmcw::ChirpSpec chirp;
  const auto s = fmcw::generate_chirp(chirp);
  const Scene scene = default_scene();
  const auto traj = synth_trajectory({Preset::kSmile, Preset::kOpenMouth}, 1, chirp.frame_rate(), 3);
  const auto a = std::span(scene.reflectors).first(3);
  const auto b = std::span(scene.reflectors).subspan(3);
  const auto ra = render_reflectors(a, traj, s);
  const auto rb = render_reflectors(b, traj, s);
  const auto rab = render_reflectors(scene.reflectors, traj, s);
  double err = 0.0;
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < rab.n_samples(); ++i)
      err = std::max(err, std::abs(ra.channels[c][i] + rb.channels[c][i] - rab.channels[c][i]));
  CHECK(err < 1e-10);
  CHECK(render_reflectors(scene.reflectors, traj, s).channels == rab.channels);
}

TEST_CASE("time-shifted trajectory shifts the differential profiles") {
  const fmcw::ChirpSpec chirp;
  const auto base = synth_trajectory({Preset::kSmile, Preset::kCloseLeftEye}, 1, chirp.frame_rate(), 8);
  const std::size_t shift = 7;
  Trajectory shifted = neutral_trajectory(base.n_frames(), base.frame_rate);
  shifted.frames.bottomRows(base.n_frames() - shift) = base.frames.topRows(base.n_frames() - shift);
  Scene scene = default_scene();
  scene.clap_times.clear();
  const auto s = fmcw::generate_chirp(chirp);
  const auto p0 = process(render_received(scene, base, s));
  const auto p1 = process(render_received(scene, shifted, s));
  const std::size_t margin = 10;
  const auto n = p0.n_frames() - shift - 2 * margin;
  const double diff = (p1.columns.middleCols(margin + shift, n) - p0.columns.middleCols(margin, n)).cwiseAbs().maxCoeff();
  CHECK(diff <= 1e-9 * p0.columns.cwiseAbs().maxCoeff());
}

TEST_CASE("render rejects reflectors beyond the unambiguous range") {
  const fmcw::ChirpSpec chirp;
  CHECK(unambiguous_range(chirp) == doctest::Approx(2.04));
  CHECK_THROWS_AS(render_received(single_reflector_scene(2.1), neutral_trajectory(2, chirp.frame_rate()),
                                  fmcw::generate_chirp(chirp)),
                  ConfigError);
  CHECK_THROWS_AS(render_received(default_scene(), neutral_trajectory(2, 30.0), fmcw::generate_chirp(chirp)),
                  ConfigError);
}

TEST_CASE("scene validation") {
  Scene s = default_scene();
  CHECK_NOTHROW(s.validate());
  s.reflectors[0].base_distance = 0.2;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = default_scene();
  s.clutter[0].distance = 0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = default_scene();
  s.reflectors.erase(s.reflectors.begin() + 4, s.reflectors.end());
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = default_scene();
  s.noise.audible_band = AudibleBand{16000.0, -10.0};
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("scene JSON round trip") {
  Scene s = default_scene();
  s.noise.white_snr_db = 30.0;
  s.noise.audible_band = AudibleBand{4000.0, -5.0};
  const nlohmann::json j = s;
  const Scene back = j.get<Scene>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.reflectors.size() == 8);
  CHECK(back.reflectors[1].mix == s.reflectors[1].mix);
  CHECK(*back.noise.white_snr_db == 30.0);
}

TEST_CASE("trajectory contracts") {
  const double rate = 50000.0 / 600.0;
  const auto zero = synth_trajectory(all_presets(), 0, rate, 1);
  CHECK(zero.frames.isZero(0.0));
  CHECK_THROWS_AS(parse_preset("frown"), ConfigError);
  CHECK(parse_preset("sneer-left") == Preset::kSneerLeft);
  for (auto p : all_presets()) CHECK(face::deformation_degree(preset_pattern(p)) == doctest::Approx(1.0));
  TrajectorySpec spec;
  spec.presets.clear();
  CHECK_THROWS_AS(synth_trajectory(spec), ConfigError);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto t = synth_trajectory(all_presets(), 6, rate, seed);
    CHECK(t.frames.minCoeff() >= 0.0);
    CHECK(t.frames.maxCoeff() <= 1000.0);
    CHECK(t.frames == synth_trajectory(all_presets(), 6, rate, seed).frames);
  }
}

TEST_CASE("default trajectory spends most frames in the 50-100 degree bucket") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrajectorySpec spec;
    spec.seed = seed;
    const auto t = synth_trajectory(spec);
    CHECK(t.duration() == doctest::Approx(120.0).epsilon(0.01));
    std::vector<double> deg(t.n_frames());
    for (std::size_t k = 0; k < t.n_frames(); ++k) {
      const Eigen::RowVectorXd row = t.frames.row(k);
      deg[k] = face::deformation_degree(std::span<const double>(row.data(), 52));
    }
    const auto h = face::bucketize(deg);
    INFO("seed " << seed << " share " << h.fractions[1]);
    CHECK(h.fractions[1] > 0.5);
  }
}

TEST_CASE("blinks honour their rate, duration and peak bounds") {
  TrajectorySpec spec;
  spec.blinks.exact_count = 20;
  spec.seed = 4;
  const auto r = synth_trajectory_ex(spec);
  CHECK(r.blinks.size() == 20);
  for (const auto& b : r.blinks) {
    CHECK(b.duration_s >= 0.15);
    CHECK(b.duration_s <= 0.3);
    CHECK(b.peak >= 300.0);
    CHECK(b.peak <= 600.0);
  }
  spec.blinks.exact_count.reset();
  const auto r2 = synth_trajectory_ex(spec);
  const double per_min = r2.blinks.size() / (spec.duration_s / 60.0);
  CHECK(per_min >= 8.0);
  CHECK(per_min <= 25.0);
}

TEST_CASE("trajectory JSON round trip") {
  TrajectorySpec spec;
  spec.presets = {Preset::kSmile, Preset::kOMouth};
  spec.timing = Timing::closed_loop();
  spec.blinks.exact_count = 12;
  const nlohmann::json j = spec;
  const TrajectorySpec back = j.get<TrajectorySpec>();
  CHECK(nlohmann::json(back) == j);
  CHECK(synth_trajectory(back).frames == synth_trajectory(spec).frames);
}

TEST_CASE("resampling") {
  auto t = neutral_trajectory(200, 50000.0 / 600.0);
  t.frames.setConstant(500.0);
  auto r = resample(t, 30.0);
  CHECK(r.n_frames() == 72);
  CHECK((r.frames.array() == 500.0).all());
  for (std::size_t k = 0; k < t.n_frames(); ++k) t.frames.row(k).setConstant(static_cast<double>(k));
  r = resample(t, 30.0);
  for (std::size_t j = 0; j < r.n_frames(); ++j) {
    const double pos = (j + 0.5) / 30.0 * t.frame_rate - 0.5;
    CHECK(r.frames(j, 0) == doctest::Approx(std::max(0.0, pos)).epsilon(1e-12));
  }
}

TEST_CASE("noise injection") {
  const fmcw::ChirpSpec chirp;
  const auto rec = render_received(default_scene(), neutral_trajectory(20, chirp.frame_rate()), fmcw::generate_chirp(chirp));
  CHECK(inject_noise(rec, NoiseSpec{}, 1).channels == rec.channels);
  NoiseSpec inf;
  inf.white_snr_db = std::numeric_limits<double>::infinity();
  CHECK(inject_noise(rec, inf, 1).channels == rec.channels);
  NoiseSpec w;
  w.white_snr_db = 10.0;
  const auto a = inject_noise(rec, w, 5);
  CHECK(a.channels == inject_noise(rec, w, 5).channels);
  CHECK(a.channels != inject_noise(rec, w, 6).channels);
  double pn = 0.0, ps = 0.0;
  for (std::size_t i = 0; i < rec.n_samples(); ++i) {
    pn += std::pow(a.channels[0][i] - rec.channels[0][i], 2);
    ps += rec.channels[0][i] * rec.channels[0][i];
  }
  CHECK(10 * std::log10(ps / pn) == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("clap placement") {
  const fmcw::ChirpSpec chirp;
  Scene scene = default_scene();
  const auto rec = render_received(scene, neutral_trajectory(200, chirp.frame_rate()), fmcw::generate_chirp(chirp));
  const auto c = inject_clap(rec, 1.0);
  std::size_t argmax = 0;
  double best = 0.0;
  for (std::size_t i = 0; i < c.n_samples(); ++i) {
    const double d = std::abs(c.channels[0][i] - rec.channels[0][i]);
    if (d > best) {
      best = d;
      argmax = i;
    }
  }
  CHECK(argmax >= 50000);
  CHECK(argmax < 50500);
  const double before = rms(std::span(rec.channels[0]).subspan(25000, 25000));
  CHECK(best == doctest::Approx(5.0 * std::sqrt((std::pow(before, 2) + std::pow(rms(std::span(rec.channels[1]).subspan(25000, 25000)), 2)) / 2)));
  CHECK_THROWS_AS(inject_clap(rec, 10.0), ConfigError);
  CHECK_THROWS_AS(inject_clap(rec, -1.0), ConfigError);
}

TEST_CASE("simulated session") {
  SessionSpec spec;
  spec.trajectory.duration_s = 6.0;
  spec.trajectory.repetitions = 1;
  const auto s = simulate_session(spec);
  CHECK(s.signal.n_samples() == s.truth.n_frames() * 600);
  CHECK(s.ground_truth.frame_rate == 30.0);
  CHECK(s.ground_truth.n_frames() == 180);
  CHECK(simulate_session(spec).signal.channels == s.signal.channels);
}
