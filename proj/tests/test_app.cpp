#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "echoface/app/bench.hpp"
#include "echoface/app/export.hpp"
#include "echoface/app/manifest.hpp"
#include "echoface/app/session_io.hpp"
#include "echoface/app/stream.hpp"
#include "echoface/model/synthetic.hpp"
#include "echoface/model/train.hpp"
#include "echoface/wire/align.hpp"
#include "echoface/wire/clap.hpp"
#include "echoface/wire/quantize.hpp"

using namespace echoface;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("echoface_test_app_" + name);
  fs::remove_all(p);
  return p;
}

sim::SessionSpec short_spec(std::uint64_t seed, double seconds) {
  auto spec = model::closed_loop_spec(seed);
  spec.trajectory.duration_s = seconds;
  return spec;
}

// One simulated session and a ridge model trained on it, shared by the
// stream cases.
struct Fixture {
  sim::SimulatedSession session;
  model::SessionData data;
  model::Model ridge;
  fmcw::Recording aligned;

  Fixture() {
    const auto spec = short_spec(41, 12.0);
    session = sim::simulate_session(spec);
    data = model::synthetic_session_data(session, spec.chirp, "fx");
    const model::SessionData* one[] = {&data};
    ridge = model::train_ridge(one, model::ModelConfig{});
    const auto clap = wire::detect_clap(session.signal);
    wire::AlignOptions ao;
    ao.guard_frames = 6;
    aligned = wire::align(session.signal, session.ground_truth, *clap,
                          wire::row_position(session.clap_times_s.front(), session.ground_truth.frame_rate), ao)
                  .signal;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("bounded queue keeps order, evicts the oldest and drains after close") {
  app::BoundedQueue<int> q(3);
  for (int i = 0; i < 3; ++i) q.push(i);
  CHECK(q.push_drop_oldest(3));
  CHECK(*q.pop() == 1);
  CHECK_FALSE(q.push_drop_oldest(4));
  q.close();
  CHECK(*q.pop() == 2);
  CHECK(*q.pop() == 3);
  CHECK(*q.pop() == 4);
  CHECK_FALSE(q.pop().has_value());
}

TEST_CASE("bounded queue blocks a producer until the consumer makes room") {
  app::BoundedQueue<int> q(1);
  std::vector<int> got;
  std::thread consumer([&] {
    while (auto v = q.pop()) got.push_back(*v);
  });
  for (int i = 0; i < 200; ++i) q.push(i);
  q.close();
  consumer.join();
  std::vector<int> want(200);
  std::iota(want.begin(), want.end(), 0);
  CHECK(got == want);
}

TEST_CASE("latency percentiles use the nearest rank") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  std::reverse(v.begin(), v.end());
  const auto s = app::latency_stats(v);
  CHECK(s.n == 100);
  CHECK(s.p50 == 50.0);
  CHECK(s.p95 == 95.0);
  CHECK(s.p99 == 99.0);
  CHECK(s.max == 100.0);
  CHECK(s.mean == doctest::Approx(50.5));
  CHECK(app::latency_stats({}).n == 0);
  CHECK(app::latency_stats({7.0}).p99 == 7.0);
}

TEST_CASE("npy files carry a 64-byte aligned header and C-order data") {
  const auto dir = scratch("npy");
  fs::create_directories(dir);
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  app::write_npy(dir / "m.npy", m);
  std::ifstream is(dir / "m.npy", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), {});
  REQUIRE(bytes.size() > 10);
  CHECK(std::memcmp(bytes.data(), "\x93NUMPY\x01\x00", 8) == 0);
  const std::size_t hlen = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
  CHECK((10 + hlen) % 64 == 0);
  const std::string header(bytes.data() + 10, hlen);
  CHECK(header.find("'descr': '<f8'") != std::string::npos);
  CHECK(header.find("'shape': (2, 3)") != std::string::npos);
  CHECK(header.back() == '\n');
  REQUIRE(bytes.size() == 10 + hlen + 6 * sizeof(double));
  double data[6];
  std::memcpy(data, bytes.data() + 10 + hlen, sizeof data);
  for (int i = 0; i < 6; ++i) CHECK(data[i] == i + 1.0);
  fs::remove_all(dir);
}

TEST_CASE("manifests sit next to their output and record the host") {
  CHECK(app::manifest_path_for("out/model.efm") == fs::path("out/model.efm.manifest.json"));
  const auto dir = scratch("manifest");
  fs::create_directories(dir);
  CHECK(app::manifest_path_for(dir) == dir / "manifest.json");
  app::Manifest m;
  m.command = "unit";
  m.seed = 9;
  m.write(dir / "manifest.json");
  std::ifstream is(dir / "manifest.json");
  const auto j = nlohmann::json::parse(is);
  CHECK(j.at("command") == "unit");
  CHECK(j.at("seed") == 9);
  CHECK(j.at("version") == app::kVersion);
  CHECK(j.contains("hardware"));
  CHECK(j.contains("build"));
  fs::remove_all(dir);
}

TEST_CASE("chirp profiles by name") {
  CHECK(app::chirp_profile("16-20").f_lo == 16000.0);
  CHECK(app::chirp_profile("20-24").f_hi == 24000.0);
  CHECK(app::chirp_profile_name(fmcw::ChirpSpec::high_band()) == "20-24");
  CHECK_THROWS(app::chirp_profile("18-22"));
}

TEST_CASE("session directories round-trip to the same training data as the 8-bit pipeline") {
  const auto spec = short_spec(7, 8.0);
  const auto s = sim::simulate_session(spec);
  const auto dir = scratch("session");
  app::SessionInfo info;
  info.id = "rt";
  info.participant = "p1";
  info.chirp = spec.chirp;
  info.clap_times_s = s.clap_times_s;
  info.seed = 7;
  app::write_session(dir, s, info);
  CHECK_THROWS_AS(app::write_session(dir, s, info), app::OutputExists);
  CHECK_NOTHROW(app::write_session(dir, s, info, true));

  const auto back = app::read_session(dir);
  CHECK(back.info.id == "rt");
  CHECK(back.info.participant == "p1");
  CHECK(back.blinks.size() == s.blinks.size());
  CHECK(back.ground_truth.frames == s.ground_truth.frames);
  const auto q = wire::requantize(s.signal);
  CHECK(back.signal.channels == q.channels);

  model::SyntheticOptions so;
  so.quantize_8bit = true;
  const auto direct = model::synthetic_session_data(s, spec.chirp, "rt", "p1", so);
  const auto loaded = app::load_session_data(dir);
  CHECK(loaded.columns == direct.columns);
  CHECK(loaded.gt == direct.gt);
  CHECK(loaded.frame_valid == direct.frame_valid);
  fs::remove_all(dir);
}

TEST_CASE("lossless loopback streaming matches offline predictions bit for bit") {
  const auto& f = fixture();
  const auto cfg = fmcw::PipelineConfig::for_chirp({});
  for (std::size_t every : {1u, 3u}) {
    CAPTURE(every);
    app::StreamConfig sc;
    sc.predict_every = every;
    sc.packet_queue = 8;  // small, so backpressure is exercised
    sc.column_queue = 4;
    const auto live = app::run_loopback(f.aligned, cfg, &f.ridge, sc);
    const auto off = app::offline_predictions(f.aligned, cfg, f.ridge, every);
    CHECK(live.packets_dropped == 0);
    CHECK(live.invalid_frames == 0);
    CHECK(live.loss.lost == 0);
    CHECK(live.frames_processed == off.frames_processed);
    REQUIRE(live.frames == off.frames);
    CHECK((live.predictions.array() == off.predictions.array()).all());
    CHECK(live.frames.front() % static_cast<std::int64_t>(every) == 0);
  }
}

TEST_CASE("link loss marks frames invalid without desynchronizing the stream") {
  const auto& f = fixture();
  const auto cfg = fmcw::PipelineConfig::for_chirp({});
  app::StreamConfig sc;
  sc.link_loss = 0.01;
  sc.seed = 3;
  const auto live = app::run_loopback(f.aligned, cfg, &f.ridge, sc);
  const auto off = app::offline_predictions(f.aligned, cfg, f.ridge);
  CHECK(live.loss.lost > 0);
  CHECK(live.invalid_frames > 0);
  CHECK(live.invalid_frames < live.frames_processed);
  // Lost samples are filled, so the frame count and the prediction grid stay put.
  CHECK(live.frames == off.frames);
}

TEST_CASE("streaming without a model runs capture and DSP only") {
  const auto& f = fixture();
  const auto r = app::run_loopback(f.aligned, fmcw::PipelineConfig::for_chirp({}), nullptr);
  CHECK(r.predictions.rows() == 0);
  CHECK(r.frames_processed == f.aligned.n_samples() / 600);
  CHECK(r.dsp_ms.size() == r.frames_processed);
}

TEST_CASE("bench reports failures against an impossible budget") {
  const auto& f = fixture();
  const auto cfg = fmcw::PipelineConfig::for_chirp({});
  app::BenchOptions bo;
  bo.inference_windows = 50;
  const auto ok = app::run_bench(f.aligned, cfg, f.ridge, nullptr, {}, bo);
  CHECK(ok.dsp.n > 0);
  CHECK(ok.ridge.n == 50);
  CHECK(ok.to_json().contains("failures"));
  app::BenchBudget strict;
  strict.dsp_p99_ms = 0.0;
  strict.ridge_p99_ms = 0.0;
  const auto bad = app::run_bench(f.aligned, cfg, f.ridge, nullptr, strict, bo);
  CHECK_FALSE(bad.ok());
  CHECK(bad.failures.size() >= 2);
}

TEST_CASE("energy share reads the lag energy table") {
  const auto dir = scratch("energy");
  fs::create_directories(dir);
  std::ofstream(dir / "lag.csv") << "lag,distance_m,ch0,ch1\n0,0.0,1,1\n1,0.05,2,0\n2,0.2,3,3\n";
  CHECK(app::energy_share_within(dir / "lag.csv", 0.1) == doctest::Approx(4.0 / 10.0));
  CHECK(app::energy_share_within(dir / "lag.csv", 1.0) == doctest::Approx(1.0));
  fs::remove_all(dir);
}
