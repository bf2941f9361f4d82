#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include "echoface/common/error.hpp"
#include "echoface/fmcw/bandpass.hpp"
#include "echoface/fmcw/chirp.hpp"
#include "echoface/fmcw/correlator.hpp"
#include "echoface/fmcw/pipeline.hpp"
#include "echoface/fmcw/profile.hpp"
#include "echoface/fmcw/waveform_io.hpp"
#include "echoface/fmcw/window.hpp"

using namespace echoface;
using namespace echoface::fmcw;

namespace {

// |H|^2 of a digital Butterworth band-pass obtained by the bilinear transform
// with pre-warped edges, written directly in the warped analog frequency.
double analytic_bandpass_db(double f, const BandpassSpec& s) {
  const double w = 2.0 * s.fs * std::tan(std::numbers::pi * f / s.fs);
  const double w1 = 2.0 * s.fs * std::tan(std::numbers::pi * s.f_low_cut / s.fs);
  const double w2 = 2.0 * s.fs * std::tan(std::numbers::pi * s.f_high_cut / s.fs);
  const double x = (w * w - w1 * w2) / (w * (w2 - w1));
  return -10.0 * std::log10(1.0 + std::pow(x * x, s.order));
}

std::vector<double> brute_correlation(const std::vector<double>& x, const std::vector<double>& s) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t i = 0; i < n; ++i) out[l] += x[(i + l) % n] * s[i];
  return out;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double tone_rms_after(const FilterCoefficients& f, double freq, std::size_t warmup, std::size_t n) {
  Waveform x;
  x.fs = f.fs;
  for (std::size_t i = 0; i < n; ++i) x.samples.push_back(std::sin(2.0 * std::numbers::pi * freq * i / f.fs));
  const auto y = apply_filter(f, x);
  double s = 0.0;
  for (std::size_t i = warmup; i < n; ++i) s += y.samples[i] * y.samples[i];
  return std::sqrt(s / static_cast<double>(n - warmup));
}

}  // namespace

TEST_CASE("chirp defaults and timing") {
  ChirpSpec c;
  CHECK(c.f_lo == 16000.0);
  CHECK(c.f_hi == 20000.0);
  CHECK(c.fs == 50000.0);
  CHECK(c.n_samples == 600);
  CHECK(c.frame_duration() == doctest::Approx(0.012).epsilon(1e-15));
  CHECK(c.frame_rate() == doctest::Approx(83.3333333333).epsilon(1e-10));
  CHECK_NOTHROW(ChirpSpec::high_band().validate());
  CHECK(ChirpSpec::high_band().f_hi == 24000.0);
}

TEST_CASE("chirp validation names the bound") {
  ChirpSpec c;
  c.f_hi = 26000.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ChirpSpec{};
  c.f_lo = 21000.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ChirpSpec{};
  c.n_samples = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ChirpSpec{};
  c.amplitude = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  try {
    ChirpSpec bad;
    bad.f_hi = 30000.0;
    bad.validate();
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("f_hi") != std::string::npos);
  }
}

TEST_CASE("chirp samples follow the linear sweep") {
  ChirpSpec c;
  const auto w = generate_chirp(c);
  REQUIRE(w.size() == 600);
  CHECK(w.samples[0] == 0.0);
  const double T = c.frame_duration();
  for (std::size_t i : {1u, 17u, 300u, 599u}) {
    const double t = i / c.fs;
    CHECK(w.samples[i] == doctest::Approx(std::sin(2 * std::numbers::pi * (c.f_lo * t + (c.f_hi - c.f_lo) * t * t / (2 * T)))));
  }
  CHECK(chirp_instantaneous_frequency(c, 0) == c.f_lo);
  CHECK(chirp_instantaneous_frequency(c, 600) == doctest::Approx(c.f_hi));
  for (double v : w.samples) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("band-pass matches the analytic Butterworth response") {
  const BandpassSpec spec;
  const auto f = design_bandpass(spec);
  CHECK(f.sections.size() == 5);
  const double center = std::sqrt(spec.f_low_cut * spec.f_high_cut);
  CHECK(std::abs(f.magnitude_db(center)) < 0.5);
  CHECK(std::abs(f.magnitude_db(15500.0) + 3.0103) < 1.0);
  CHECK(std::abs(f.magnitude_db(20500.0) + 3.0103) < 1.0);
  CHECK(f.magnitude_db(5000.0) <= -60.0);
  for (double hz : {200.0, 3000.0, 12000.0, 16000.0, 18000.0, 20000.0, 22000.0, 24500.0})
    CHECK(f.magnitude_db(hz) == doctest::Approx(analytic_bandpass_db(hz, spec)).epsilon(1e-6));
}

TEST_CASE("band-pass rejects invalid cutoffs") {
  BandpassSpec s;
  s.f_high_cut = 25000.0;
  CHECK_THROWS_AS(design_bandpass(s), ConfigError);
  s = BandpassSpec{};
  s.f_low_cut = 21000.0;
  CHECK_THROWS_AS(design_bandpass(s), ConfigError);
  s = BandpassSpec{};
  s.f_low_cut = 0.0;
  CHECK_THROWS_AS(design_bandpass(s), ConfigError);
}

TEST_CASE("high-band filter follows the chirp") {
  const auto s = BandpassSpec::for_chirp(ChirpSpec::high_band());
  CHECK(s.f_low_cut == 19500.0);
  CHECK(s.f_high_cut == 24500.0);
  const auto f = design_bandpass(s);
  CHECK(f.magnitude_db(5000.0) <= -60.0);
  CHECK(f.magnitude_db(22000.0) == doctest::Approx(analytic_bandpass_db(22000.0, s)).epsilon(1e-6));
}

TEST_CASE("apply_filter tone behaviour") {
  const auto f = design_bandpass(BandpassSpec{});
  CHECK(tone_rms_after(f, 1000.0, 2000, 12000) <= 0.001);
  const double amp = tone_rms_after(f, 18000.0, 2000, 12000) * std::sqrt(2.0);
  CHECK(std::abs(amp - std::abs(f.response(18000.0))) < 0.01);
  CHECK(std::abs(amp - 1.0) < 0.06);
  Waveform z;
  z.fs = 50000.0;
  z.samples.assign(1000, 0.0);
  for (double v : apply_filter(f, z).samples) CHECK(v == 0.0);
}

TEST_CASE("filter output is deterministic") {
  const auto f = design_bandpass(BandpassSpec{});
  std::mt19937_64 rng(3);
  Waveform x;
  x.fs = 50000.0;
  x.samples = random_vector(rng, 5000);
  for (auto& v : x.samples) v *= 0.1;
  CHECK(apply_filter(f, x).samples == apply_filter(f, x).samples);
}

TEST_CASE("frame_stream segmentation") {
  std::vector<double> x(1250, 1.0);
  CHECK(frame_stream(x, 600).size() == 2);
  CHECK(frame_count(1250, 600) == 2);
  CHECK(frame_stream(std::span(x).first(600), 600).size() == 1);
  CHECK(frame_stream(std::span(x).first(599), 600).empty());
  CHECK_THROWS_AS(frame_stream(x, 0), ConfigError);
}

TEST_CASE("echo_profile matches brute-force circular correlation") {
  std::mt19937_64 rng(11);
  const auto x = random_vector(rng, 600);
  const auto s = random_vector(rng, 600);
  const auto fast = echo_profile(x, s);
  const auto slow = brute_correlation(x, s);
  double peak = 0.0;
  for (double v : slow) peak = std::max(peak, std::abs(v));
  for (std::size_t l = 0; l < 600; ++l) CHECK(std::abs(fast[l] - slow[l]) < 1e-10 * peak);
}

TEST_CASE("echo_profile delay examples") {
  const auto s = generate_chirp(ChirpSpec{}).samples;
  auto p = echo_profile(s, s);
  CHECK(peak_lag(p) == 0);
  std::vector<double> delayed(600);
  for (std::size_t i = 0; i < 600; ++i) delayed[i] = s[(i + 600 - 50) % 600];
  p = echo_profile(delayed, s);
  CHECK(std::max_element(p.begin(), p.end()) - p.begin() == 50);
  CHECK(peak_lag(p) == 50);
  CHECK_THROWS_AS(echo_profile(std::span(s).first(599), s), ShapeError);
}

TEST_CASE("circular-shift equivariance, exhaustive at n=16") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vector(rng, 16);
    const auto s = random_vector(rng, 16);
    const auto base = echo_profile(x, s);
    for (std::size_t k = 0; k < 16; ++k) {
      std::vector<double> shifted(16);
      for (std::size_t i = 0; i < 16; ++i) shifted[(i + k) % 16] = x[i];
      const auto p = echo_profile(shifted, s);
      for (std::size_t l = 0; l < 16; ++l) CHECK(p[(l + k) % 16] == doctest::Approx(base[l]).epsilon(1e-12).scale(10));
    }
  }
}

TEST_CASE("echo_profile linearity") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_vector(rng, 600);
    const auto y = random_vector(rng, 600);
    const auto s = random_vector(rng, 600);
    const double a = u(rng), b = u(rng);
    std::vector<double> z(600);
    for (std::size_t i = 0; i < 600; ++i) z[i] = a * x[i] + b * y[i];
    const auto pz = echo_profile(z, s), px = echo_profile(x, s), py = echo_profile(y, s);
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < 600; ++l) {
      const double e = a * px[l] + b * py[l];
      num = std::max(num, std::abs(pz[l] - e));
      den = std::max(den, std::abs(e));
    }
    CHECK(num <= 1e-12 * den);
  }
}

TEST_CASE("differential and truncation") {
  EchoProfile a, b;
  a.values = Eigen::MatrixXd::Random(600, 2);
  b.values = a.values;
  a.frame_index = 4;
  b.frame_index = 5;
  auto d = differential(a, b);
  CHECK(d.frame_index == 5);
  CHECK(d.values.isZero(0.0));
  b.values(10, 1) += 2.0;
  d = differential(a, b);
  CHECK(d.values(10, 1) == doctest::Approx(2.0));
  b.frame_index = 7;
  CHECK_THROWS_AS(differential(a, b), ShapeError);
  EchoProfile c;
  c.values = Eigen::MatrixXd::Zero(300, 2);
  c.frame_index = 5;
  CHECK_THROWS_AS(differential(a, c), ShapeError);

  DiffProfile dp;
  dp.values = Eigen::MatrixXd::Random(600, 2);
  const auto t = truncate_bins(dp);
  CHECK(t.rows() == 30);
  CHECK(t.cols() == 2);
  CHECK(t == dp.values.topRows(30));
  CHECK_THROWS_AS(truncate_bins(dp, 601), ConfigError);
}

TEST_CASE("bin geometry") {
  CHECK(bin_to_distance(0) == 0.0);
  CHECK(bin_to_distance(1) - bin_to_distance(0) == doctest::Approx(0.0034).epsilon(1e-12));
  CHECK(bin_to_distance(30) == doctest::Approx(0.102).epsilon(1e-12));
  CHECK(bin_to_distance(50) == doctest::Approx(0.17).epsilon(1e-12));
  CHECK(bin_to_distance(599) == doctest::Approx(2.0366).epsilon(1e-12));
  CHECK(truncation_range() == doctest::Approx(0.102).epsilon(1e-12));
}

namespace {
std::vector<DiffProfile> random_diffs(std::size_t count, std::int64_t first) {
  std::vector<DiffProfile> v;
  for (std::size_t i = 0; i < count; ++i) {
    DiffProfile d;
    d.values = Eigen::MatrixXd::Random(600, 2);
    d.frame_index = first + static_cast<std::int64_t>(i);
    v.push_back(d);
  }
  return v;
}
}  // namespace

TEST_CASE("window layout and readiness") {
  const auto diffs = random_diffs(84, 1);
  CHECK_FALSE(build_window(std::span(diffs).first(83)).has_value());
  const auto w = build_window(diffs);
  REQUIRE(w.has_value());
  CHECK(w->rows() == 60);
  CHECK(w->cols() == 84);
  CHECK(w->current_frame == 84);
  for (std::size_t t = 0; t < 84; ++t) {
    CHECK(w->values.col(t).head(30) == diffs[t].values.col(0).head(30));
    CHECK(w->values.col(t).tail(30) == diffs[t].values.col(1).head(30));
  }
  auto gap = diffs;
  gap[40].frame_index += 1;
  CHECK_THROWS_AS(build_window(gap), ShapeError);
}

TEST_CASE("incremental window equals rebuilt window bit-exactly") {
  const auto diffs = random_diffs(200, 1);
  WindowBuilder wb;
  std::optional<EchoWindow> prev;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    wb.push(diffs[i]);
    CHECK(wb.ready() == (i + 1 >= 84));
    if (!wb.ready()) continue;
    const auto inc = wb.window();
    const auto ref = build_window(std::span(diffs).subspan(i + 1 - 84, 84));
    REQUIRE(inc.has_value());
    CHECK(inc->values == ref->values);
    CHECK(inc->current_frame == ref->current_frame);
    if (prev) CHECK(inc->values.leftCols(83) == prev->values.rightCols(83));
    prev = inc;
  }
  DiffProfile skip = diffs.back();
  skip.frame_index += 2;
  CHECK_THROWS_AS(wb.push(skip), ShapeError);
}

TEST_CASE("pipeline template and history") {
  const auto cfg = PipelineConfig::for_chirp(ChirpSpec{});
  FramePipeline p(cfg);
  CHECK(p.history_samples() % 600 == 0);
  CHECK(p.history_samples() >= p.filter().settling_samples());
  // A periodic chirp at lag 0 correlates to its peak at lag 0.
  const auto chirp = generate_chirp(cfg.chirp).samples;
  std::vector<std::span<const double>> views = {chirp, chirp};
  for (int k = 0; k < 3; ++k) {
    const auto step = p.push_frame(views);
    CHECK(peak_lag(std::span<const double>(step.profile->values.col(0).data(), 600)) == 0);
    if (step.diff) CHECK(step.diff->values.isZero(0.0));
  }
  std::vector<std::span<const double>> one = {chirp};
  CHECK_THROWS_AS(p.push_frame(one), ShapeError);
}

TEST_CASE("pipeline concealment holds the previous profile") {
  const auto cfg = PipelineConfig::for_chirp(ChirpSpec{});
  FramePipeline p(cfg);
  std::mt19937_64 rng(2);
  std::vector<std::vector<double>> frames;
  for (int k = 0; k < 4; ++k) frames.push_back(random_vector(rng, 600));
  std::vector<std::span<const double>> v0 = {frames[0], frames[1]};
  std::vector<std::span<const double>> v1 = {frames[2], frames[3]};
  p.push_frame(v0);
  const auto s = p.push_frame(v1, false);
  REQUIRE(s.diff != nullptr);
  CHECK(s.diff->values.isZero(0.0));
}

TEST_CASE("sample file round trip") {
  auto rec = make_recording(2, 1000, 50000.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& ch : rec.channels)
    for (auto& v : ch) v = u(rng);
  std::stringstream ss;
  write_recording(ss, rec, 64);
  CHECK(ss.str().size() == kWaveformHeaderSize + 2 * 1000 * 8);
  WaveformHeader h;
  const auto back = read_recording(ss, &h);
  CHECK(h.channels == 2);
  CHECK(h.fs == 50000);
  CHECK(h.sample_count == 1000);
  CHECK(back.channels == rec.channels);

  std::stringstream s8;
  rec.channels[0][3] = 1.5;
  const auto st = write_recording(s8, rec, 8);
  CHECK(st.saturated == 1);
  CHECK(s8.str().size() == kWaveformHeaderSize + 2 * 1000);
  const auto q = read_recording(s8);
  for (std::size_t i = 0; i < 1000; ++i)
    if (i != 3) CHECK(std::abs(q.channels[0][i] - rec.channels[0][i]) <= 1.0 / 254 + 1e-15);
  CHECK(q.channels[0][3] == 1.0);

  std::stringstream bad("XXXX0000000000000000000000");
  CHECK_THROWS_AS(read_recording(bad), DataError);
  std::stringstream ss2;
  write_recording(ss2, rec, 64);
  std::string cut = ss2.str().substr(0, 100);
  std::stringstream trunc(cut);
  CHECK_THROWS_AS(read_recording(trunc), DataError);
}

TEST_CASE("window dump round trip") {
  EchoWindow w;
  w.values = Eigen::MatrixXd::Random(60, 84);
  w.current_frame = 100;
  std::stringstream ss;
  write_window_binary(ss, w);
  CHECK(ss.str().size() == 8 + 60 * 84 * 4);
  const auto back = read_window_binary(ss);
  CHECK(back.values.rows() == 60);
  CHECK((back.values - w.values).cwiseAbs().maxCoeff() < 1e-6);
  std::stringstream csv;
  write_window_csv(csv, w);
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("row,f17,", 0) == 0);
}
