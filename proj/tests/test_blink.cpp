#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "echoface/blink/blink.hpp"
#include "echoface/blink/detector.hpp"
#include "echoface/face/blendshape.hpp"
#include "echoface/model/synthetic.hpp"
#include "echoface/sim/trajectory.hpp"

using namespace echoface;
using namespace echoface::blink;

namespace {

constexpr double kRate = 50000.0 / 600.0;

// Triangle from 0 up to `peak` and back over `duration_s`, centred at `centre_s`.
void add_pulse(std::vector<double>& x, double centre_s, double duration_s, double peak) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / kRate;
    const double u = 1.0 - std::abs(t - centre_s) / (0.5 * duration_s);
    if (u > 0.0) x[i] = std::max(x[i], peak * u);
  }
}

std::vector<BlinkEvent> random_events(std::mt19937_64& rng, int n, std::int64_t span) {
  std::uniform_int_distribution<std::int64_t> at(0, span);
  std::vector<BlinkEvent> v;
  for (int i = 0; i < n; ++i) {
    const auto o = at(rng);
    v.push_back({o, o + 15, 400.0});
  }
  return v;
}

}  // namespace

TEST_CASE("flat signals produce no events") {
  std::vector<double> zeros(2000, 0.0), high(2000, 400.0);
  CHECK(extract_events(zeros).empty());
  // Above threshold for the whole recording: far longer than any blink.
  CHECK(extract_events(high).empty());
}

TEST_CASE("a single pulse yields exactly one event") {
  std::vector<double> x(1000, 0.0);
  add_pulse(x, 5.0, 0.2, 500.0);
  const auto ev = extract_events(x);
  REQUIRE(ev.size() == 1);
  // The apex can fall up to half a frame from the nearest sample.
  CHECK(ev[0].peak <= 500.0);
  CHECK(ev[0].peak >= 500.0 * (1.0 - 0.5 / kRate / 0.1));
  // Onset is where the pulse first exceeds the off threshold.
  const double up = 5.0 - 0.1 * (1.0 - 150.0 / 500.0);
  CHECK(std::abs(static_cast<double>(ev[0].onset) / kRate - up) < 1.5 / kRate);
  CHECK(ev[0].offset > ev[0].onset);

  const auto shifted = extract_events(x, {}, 84);
  REQUIRE(shifted.size() == 1);
  CHECK(shifted[0].onset == ev[0].onset + 84);
}

TEST_CASE("hysteresis and duration bounds") {
  std::vector<double> x(1500, 0.0);
  add_pulse(x, 2.0, 0.2, 240.0);   // never reaches on
  add_pulse(x, 4.0, 0.06, 600.0);  // too short
  for (std::size_t i = static_cast<std::size_t>(8.0 * kRate); i < static_cast<std::size_t>(9.0 * kRate); ++i)
    x[i] = 500.0;  // too long
  CHECK(extract_events(x).empty());

  // A dip that stays above off does not split one blink into two.
  std::vector<double> y(600, 0.0);
  for (std::size_t i = 200; i < 220; ++i) y[i] = (i >= 208 && i < 211) ? 200.0 : 450.0;
  CHECK(extract_events(y).size() == 1);

  // Re-crossing below off does.
  y[209] = 100.0;
  ExtractorConfig c;
  c.min_duration_s = 0.0;
  CHECK(extract_events(y, c).size() == 2);

  // Still open at the end of the signal.
  std::vector<double> tail(300, 0.0);
  for (std::size_t i = 290; i < 300; ++i) tail[i] = 500.0;
  const auto ev = extract_events(tail);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].offset == 300);

  c = {};
  c.off_threshold = 300.0;
  c.on_threshold = 200.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("blink signal averages both eyes") {
  std::vector<face::BlendshapeVector> frames(3);
  frames[0][*face::index_of("eyeBlink_L")] = 400.0;
  frames[0][*face::index_of("eyeBlink_R")] = 400.0;
  frames[1][*face::index_of("eyeBlink_L")] = 600.0;
  frames[2][*face::index_of("eyeBlink_R")] = 600.0;
  frames[2][*face::index_of("jawOpen")] = 900.0;
  const auto s = blink_signal(frames);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == 400.0);
  CHECK(s[1] == 300.0);
  CHECK(s[2] == 300.0);  // symmetric in left and right; other outputs ignored

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, face::kNumBlendshapes);
  for (int i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < face::kNumBlendshapes; ++j) m(i, j) = frames[i][j];
  CHECK(blink_signal(m) == s);
}

TEST_CASE("F1 scoring") {
  const std::vector<BlinkEvent> gt = {{100, 115, 400}, {400, 420, 500}, {900, 915, 350}};
  auto r = match_and_f1(gt, gt, kRate);
  CHECK(r.f1 == 1.0);
  CHECK(r.tp == 3);

  r = match_and_f1({}, gt, kRate);
  CHECK(r.f1 == 0.0);
  CHECK(r.fn == 3);
  CHECK(match_and_f1({}, {}, kRate).f1 == 1.0);

  // 12 frames = 144 ms is inside the ±150 ms tolerance; 13 frames is not.
  std::vector<BlinkEvent> near = {{112, 130, 400}}, far = {{113, 130, 400}};
  CHECK(match_and_f1(near, std::span(gt).first(1), kRate).tp == 1);
  CHECK(match_and_f1(far, std::span(gt).first(1), kRate).tp == 0);

  // One prediction can match only one truth event.
  std::vector<BlinkEvent> pair = {{100, 110, 400}, {104, 114, 400}};
  std::vector<BlinkEvent> one = {{102, 112, 400}};
  r = match_and_f1(one, pair, kRate);
  CHECK(r.tp == 1);
  CHECK(r.fn == 1);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 0.5);
}

TEST_CASE("F1 properties on random event lists") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pred = random_events(rng, static_cast<int>(rng() % 25), 5000);
    const auto gt = random_events(rng, static_cast<int>(rng() % 25), 5000);
    const auto r = match_and_f1(pred, gt, kRate);
    CHECK(r.tp <= std::min(pred.size(), gt.size()));
    CHECK(r.tp + r.fp == pred.size());
    CHECK(r.tp + r.fn == gt.size());
    CHECK(r.f1 >= 0.0);
    CHECK(r.f1 <= 1.0);

    // Joint time shift.
    auto p2 = pred, g2 = gt;
    const std::int64_t dt = static_cast<std::int64_t>(rng() % 1000);
    for (auto& e : p2) e.onset += dt, e.offset += dt;
    for (auto& e : g2) e.onset += dt, e.offset += dt;
    CHECK(match_and_f1(p2, g2, kRate).tp == r.tp);

    // Symmetric in its arguments up to swapping precision and recall.
    const auto s = match_and_f1(gt, pred, kRate);
    CHECK(s.tp == r.tp);
    CHECK(s.f1 == doctest::Approx(r.f1));
  }
}

TEST_CASE("scaling the signal keeps events whose crossings it preserves") {
  std::vector<double> x(3000, 0.0);
  for (double c : {3.0, 10.0, 17.0, 25.0}) add_pulse(x, c, 0.25, 500.0);
  const auto base = extract_events(x);
  REQUIRE(base.size() == 4);
  // Scaling the signal and both thresholds together changes nothing.
  for (double k : {0.5, 2.0, 10.0}) {
    std::vector<double> y(x);
    for (double& v : y) v *= k;
    ExtractorConfig c;
    c.on_threshold *= k;
    c.off_threshold *= k;
    const auto ev = extract_events(y, c);
    REQUIRE(ev.size() == base.size());
    for (std::size_t i = 0; i < ev.size(); ++i) {
      CHECK(ev[i].onset == base[i].onset);
      CHECK(ev[i].offset == base[i].offset);
    }
  }
}

TEST_CASE("events CSV round trip") {
  const std::vector<BlinkEvent> ev = {{100, 115, 400.5}, {4000, 4020, 512.25}};
  std::stringstream ss;
  write_events_csv(ss, ev, kRate);
  CHECK(ss.str().rfind("onset_s,offset_s,peak\n", 0) == 0);
  const auto back = read_events_csv(ss, kRate);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].onset == ev[i].onset);
    CHECK(back[i].offset == ev[i].offset);
    CHECK(back[i].peak == doctest::Approx(ev[i].peak));
  }
  std::stringstream bad("onset_s,offset_s,peak\n1.0,x,3\n");
  CHECK_THROWS_AS(read_events_csv(bad, kRate), DataError);
}

TEST_CASE("simulated trajectories with 20 blinks give 20 +- 1 events") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    sim::TrajectorySpec spec;
    spec.duration_s = 60.0;
    // Eye presets hold the lids shut for seconds and would swallow blinks.
    spec.presets = {sim::Preset::kOpenMouth, sim::Preset::kOMouth, sim::Preset::kSmile, sim::Preset::kSneerLeft,
                    sim::Preset::kSneerRight};
    spec.repetitions = 3;
    spec.timing = sim::Timing::closed_loop();
    spec.blinks.exact_count = 20;
    spec.seed = seed;
    const auto r = sim::synth_trajectory_ex(spec);
    REQUIRE(r.blinks.size() == 20);
    const auto ev = extract_events(blink_signal(r.trajectory.frames));
    CHECK(std::abs(static_cast<int>(ev.size()) - 20) <= 1);

    std::vector<BlinkEvent> truth;
    for (const auto& b : r.blinks) {
      const auto o = static_cast<std::int64_t>(std::lround(b.onset_s * spec.frame_rate));
      truth.push_back({o, o + static_cast<std::int64_t>(b.duration_s * spec.frame_rate), b.peak});
    }
    CHECK(match_and_f1(ev, truth, spec.frame_rate).f1 >= 0.95);
  }
}

TEST_CASE("detector wiring") {
  auto spec = model::closed_loop_spec(3);
  spec.trajectory.duration_s = 8.0;
  spec.trajectory.presets = {sim::Preset::kSmile};
  spec.trajectory.repetitions = 1;
  spec.trajectory.blinks.exact_count = 4;
  const auto s = model::synthetic_session_data(spec, "d");
  const std::vector<const model::SessionData*> list = {&s};

  auto bad = blink_model_config();
  bad.outputs = model::all_outputs();
  CHECK_THROWS_AS(train_blink_model(list, bad, blink_train_config()), ConfigError);

  auto tc = blink_train_config();
  tc.epochs = 0;
  const auto m = train_blink_model(list, blink_model_config(), tc).model;
  CHECK(m.n_outputs() == 2);
  const auto sig = predicted_blink_signal(m, s);
  CHECK(sig.size() == s.n_windows());
  for (const auto& e : truth_events(s)) CHECK(e.onset >= 84);
  for (const auto& e : predicted_events(m, s)) CHECK(e.onset >= 84);

  ExtractorConfig c;
  c.frame_rate = s.frame_rate;
  const auto r = evaluate_blinks(m, s, c);
  CHECK(r.tp + r.fn == truth_events(s, c).size());
}
