#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include "echoface/common/error.hpp"
#include "echoface/model/augment.hpp"
#include "echoface/model/crossval.hpp"
#include "echoface/model/synthetic.hpp"

using namespace echoface;
using namespace echoface::model;

namespace {

sim::SessionSpec short_spec(std::uint64_t seed, double seconds = 24.0) {
  auto spec = closed_loop_spec(seed);
  spec.trajectory.repetitions = 1;
  spec.trajectory.duration_s = seconds;
  return spec;
}

const SessionData& cached_session(int which) {
  static std::vector<SessionData> cache = [] {
    std::vector<SessionData> v;
    for (int i = 0; i < 4; ++i) v.push_back(synthetic_session_data(short_spec(40 + i), "t" + std::to_string(i)));
    return v;
  }();
  return cache.at(static_cast<std::size_t>(which));
}

// Keeps `bins` rows per channel and a window of `frames` columns.
SessionData narrow(const SessionData& s, std::size_t bins, std::size_t frames) {
  SessionData r = s;
  r.shape.n_bins = bins;
  r.shape.n_frames = frames;
  r.columns.resize(static_cast<Eigen::Index>(2 * bins), s.columns.cols());
  for (std::size_t c = 0; c < 2; ++c)
    r.columns.middleRows(static_cast<Eigen::Index>(c * bins), static_cast<Eigen::Index>(bins)) =
        s.columns.middleRows(static_cast<Eigen::Index>(c * s.shape.n_bins), static_cast<Eigen::Index>(bins));
  return r;
}

SessionData fake_session(std::size_t frames, std::uint64_t seed, std::string id) {
  SessionData s;
  s.session_id = s.participant = std::move(id);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  s.columns = Eigen::MatrixXd::NullaryExpr(60, static_cast<Eigen::Index>(frames), [&] { return g(rng); });
  s.columns.col(0).setZero();
  s.gt = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(frames), 52);
  return s;
}

Eigen::MatrixXd flat_windows(const SessionData& s) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(s.shape.size()), static_cast<Eigen::Index>(s.n_windows()));
  for (std::size_t i = 0; i < s.n_windows(); ++i) {
    const Eigen::MatrixXd w = s.window(i);
    x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
  }
  return x;
}

std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("window counting and column sharing") {
  wire::AlignedSession a;
  a.signal = fmcw::make_recording(2, 10000 * 600, 50000.0);
  a.gt = Eigen::MatrixXd::Zero(10000, 52);
  a.frame_len = 600;
  auto cfg = fmcw::PipelineConfig::for_chirp({});
  const auto s = assemble_dataset(a, cfg, "zeros");
  CHECK(s.n_windows() == 9916);
  CHECK(s.columns.cwiseAbs().maxCoeff() == 0.0);

  const auto& live = cached_session(0);
  const Eigen::MatrixXd w0 = live.window(100), w1 = live.window(101);
  CHECK(w0.rightCols(83) == w1.leftCols(83));
  const auto mats = materialize(live, 100, 2);
  REQUIRE(mats.size() == 2);
  CHECK(mats[0].frame_index == 184);
  CHECK(mats[0].input.values.col(83) == live.columns.col(184));
  CHECK(mats[0].target[5] == live.gt(184, 5));

  wire::AlignedSession tiny = a;
  tiny.signal = fmcw::make_recording(2, 84 * 600, 50000.0);
  tiny.gt = Eigen::MatrixXd::Zero(84, 52);
  CHECK_THROWS_AS(assemble_dataset(tiny, cfg, "short"), DataError);
}

TEST_CASE("session data round trip") {
  const auto& s = cached_session(1);
  const auto path = std::filesystem::temp_directory_path() / "echoface_session.eeds";
  save_session_data(path.string(), s);
  const auto back = load_session_data(path.string());
  CHECK(back.columns == s.columns);
  CHECK(back.gt == s.gt);
  CHECK(back.session_id == s.session_id);
  std::filesystem::remove(path);
}

TEST_CASE("vertical shift algebra") {
  const auto w = materialize(cached_session(0), 300, 1).front();
  CHECK(augment_vertical_shift(w, 0).input.values == w.input.values);
  const auto there = augment_vertical_shift(w, 2);
  const auto back = augment_vertical_shift(there, -2);
  CHECK(back.target == w.target);
  for (int block = 0; block < 2; ++block) {
    const int base = block * 30;
    CHECK(back.input.values.middleRows(base, 28) == w.input.values.middleRows(base, 28));
    CHECK(back.input.values.middleRows(base + 28, 2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(there.input.values.middleRows(base, 2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(there.input.values.middleRows(base + 2, 28) == w.input.values.middleRows(base, 28));
  }
  CHECK_THROWS_AS(augment_vertical_shift(w, 4), ConfigError);
  CHECK_THROWS_AS(augment_vertical_shift(w, -4), ConfigError);
  CHECK(augment_vertical_shift_random(w, 3, 9).input.values == augment_vertical_shift_random(w, 3, 9).input.values);
}

TEST_CASE("motion augmentation") {
  auto cfg = fmcw::PipelineConfig::for_chirp({});
  const auto bank = make_motion_bank(cfg, 6.0, 3);
  REQUIRE(!bank.empty());
  CHECK(bank.columns().cwiseAbs().maxCoeff() > 0.0);
  const auto w = materialize(cached_session(0), 500, 1).front();
  CHECK(augment_motion(w, bank, 0.0, 1).input.values == w.input.values);
  const auto a = augment_motion(w, bank, 1.0, 5), b = augment_motion(w, bank, 1.0, 5);
  CHECK(a.input.values == b.input.values);
  CHECK(a.input.values != w.input.values);
  CHECK(a.target == w.target);
  CHECK_THROWS_AS(augment_motion(w, MotionBank{}, 1.0, 1), ConfigError);
}

TEST_CASE("structured Gram equals the explicit design matrix") {
  const auto s = slice_frames(cached_session(2), 300, 500);
  const auto outs = all_outputs();
  for (auto mode : {TargetMode::kAbsolute, TargetMode::kChange}) {
    const auto a = session_gram(s, mode, outs);
    const auto b = session_gram_direct(s, mode, outs);
    const double scale = b.xtx.cwiseAbs().maxCoeff();
    CHECK((a.xtx - b.xtx).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    CHECK((a.xsum - b.xsum).cwiseAbs().maxCoeff() <= 1e-12 * b.xsum.cwiseAbs().maxCoeff());
    CHECK((a.xty - b.xty).cwiseAbs().maxCoeff() <= 1e-12 * b.xty.cwiseAbs().maxCoeff());
    CHECK(a.n == b.n);
  }
}

TEST_CASE("ridge matches an independent least-squares oracle") {
  // Small shape so the augmented system [1 X; 0 sqrt(lambda) I] is cheap to
  // solve by pivoted QR, independently of the Gram path.
  const auto s = narrow(slice_frames(cached_session(0), 0, 900), 4, 6);
  std::vector<const SessionData*> one{&s};
  ModelConfig cfg;
  cfg.target = TargetMode::kAbsolute;
  cfg.ridge.lambda = 1e-3;
  const Model m = train_ridge(one, cfg);

  Eigen::MatrixXd x = flat_windows(s);
  const auto frames = static_cast<Eigen::Index>(s.shape.n_frames);
  const Eigen::VectorXd mean = m.norm.mean.replicate(frames, 1), scale = m.norm.scale.replicate(frames, 1);
  x.colwise() -= mean;
  x.array().colwise() /= scale.array();
  const Eigen::MatrixXd xt = x.transpose();
  const Eigen::MatrixXd xc = xt.rowwise() - xt.colwise().mean();
  const double lambda = cfg.ridge.lambda * (xc.array().square().colwise().sum().mean());
  const Eigen::Index n = xt.rows(), d = xt.cols();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + d, d + 1);
  a.topLeftCorner(n, 1).setOnes();
  a.topRightCorner(n, d) = xt;
  a.bottomRightCorner(d, d) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + d, 52);
  rhs.topRows(n) = window_targets(s, TargetMode::kAbsolute, cfg.outputs);
  const Eigen::MatrixXd sol = a.colPivHouseholderQr().solve(rhs);
  Eigen::MatrixXd oracle = (xt * sol.bottomRows(d)).rowwise() + sol.row(0);
  face::clamp_rows(oracle);

  const Eigen::MatrixXd pred = m.predict_session(s);
  CHECK((pred - oracle).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("ridge limits and failure modes") {
  const auto s = slice_frames(cached_session(1), 0, 1200);
  std::vector<const SessionData*> one{&s};
  SUBCASE("constant targets give a constant prediction") {
    SessionData c = s;
    c.gt.setConstant(321.0);
    std::vector<const SessionData*> cs{&c};
    ModelConfig cfg;
    cfg.target = TargetMode::kAbsolute;
    cfg.ridge.lambda = 1e-9;
    const auto pred = train_ridge(cs, cfg).predict_session(c);
    CHECK((pred.array() - 321.0).abs().maxCoeff() < 1e-6);
  }
  SUBCASE("infinite penalty gives the target mean") {
    ModelConfig cfg;
    cfg.target = TargetMode::kAbsolute;
    cfg.ridge.lambda = 1e12;
    const Model m = train_ridge(one, cfg);
    CHECK(m.ridge.w.cwiseAbs().maxCoeff() < 1e-6);
    const Eigen::RowVectorXd mean = window_targets(s, TargetMode::kAbsolute, cfg.outputs).colwise().mean();
    const Eigen::MatrixXd pred = m.predict_session(s);
    CHECK((pred.rowwise() - mean).cwiseAbs().maxCoeff() < 1e-3);
  }
  SUBCASE("lambda zero with fewer windows than inputs is singular") {
    ModelConfig cfg;
    cfg.ridge.lambda = 0.0;
    CHECK_THROWS_AS(train_ridge(one, cfg), DataError);
  }
  SUBCASE("negative lambda is rejected") {
    ModelConfig cfg;
    cfg.ridge.lambda = -1.0;
    CHECK_THROWS_AS(train_ridge(one, cfg), ConfigError);
  }
}

TEST_CASE("ridge training loss does not grow with duplication") {
  const auto s = narrow(slice_frames(cached_session(2), 0, 1500), 6, 10);
  ModelConfig cfg;
  cfg.target = TargetMode::kAbsolute;
  cfg.ridge.lambda = 50.0;
  cfg.ridge.relative_lambda = false;
  double previous = std::numeric_limits<double>::infinity();
  for (int copies = 1; copies <= 4; ++copies) {
    std::vector<const SessionData*> ds(static_cast<std::size_t>(copies), &s);
    const Model m = train_ridge(ds, cfg);
    const Eigen::MatrixXd raw = ridge_predict_session(m.ridge, m.norm, s);
    const double loss = (raw - window_targets(s, TargetMode::kAbsolute, cfg.outputs)).squaredNorm();
    CHECK(loss <= previous * (1.0 + 1e-12));
    previous = loss;
  }
}

TEST_CASE("noiseless simulator session is fit closely by ridge") {
  const auto& s = cached_session(3);
  std::vector<const SessionData*> one{&s};
  const Model m = train_ridge(one, ModelConfig{});
  CHECK(session_mae(m, s) <= 5.0);
}

TEST_CASE("ridge predict equals the manual matrix product") {
  const auto& s = cached_session(0);
  std::vector<const SessionData*> one{&s};
  const Model m = train_ridge(one, ModelConfig{});
  const auto w = materialize(s, 700, 1).front();
  const auto frames = static_cast<Eigen::Index>(s.shape.n_frames);
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(w.input.values.data(), w.input.values.size());
  x = (x - m.norm.mean.replicate(frames, 1)).cwiseQuotient(m.norm.scale.replicate(frames, 1));
  Eigen::RowVectorXd manual = m.ridge.bias + m.rest;
  for (Eigen::Index j = 0; j < manual.size(); ++j) {
    for (Eigen::Index i = 0; i < x.size(); ++i) manual[j] += x[i] * m.ridge.w(i, j);
    manual[j] = std::clamp(manual[j], 0.0, 1000.0);
  }
  const auto pred = m.predict(w.input);
  const Eigen::MatrixXd all = m.predict_session(s);
  for (std::size_t j = 0; j < 52; ++j) {
    CHECK(pred[j] == doctest::Approx(manual[static_cast<Eigen::Index>(j)]).epsilon(1e-9));
    CHECK(all(700, static_cast<Eigen::Index>(j)) == doctest::Approx(pred[j]).epsilon(1e-9));
  }

  fmcw::EchoWindow adversarial = w.input;
  adversarial.values *= 1e6;
  for (double v : m.predict(adversarial)) CHECK((v >= 0.0 && v <= 1000.0));
  adversarial.values *= -1.0;
  for (double v : m.predict(adversarial)) CHECK((v >= 0.0 && v <= 1000.0));

  fmcw::EchoWindow wrong;
  wrong.values = Eigen::MatrixXd::Zero(59, 84);
  CHECK_THROWS_AS(m.predict(wrong), ShapeError);
}

TEST_CASE("conv gradient check on a tiny network") {
  const auto& s = cached_session(1);
  ConvConfig tiny;
  tiny.blocks = {{4, 2}, {4, 2}};
  const ConvNet net(tiny, s.shape, 52, 3);
  std::vector<const SessionData*> one{&s};
  const auto norm = compute_norm_stats(one);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(s.shape.size()), 8), t(52, 8);
  for (int j = 0; j < 8; ++j) {
    Eigen::MatrixXd w = s.window(static_cast<std::size_t>(200 + 150 * j));
    norm.apply(w);
    x.col(j) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    t.col(j) = (s.target(static_cast<std::size_t>(200 + 150 * j)).array() / 100.0 - 0.5).matrix().transpose();
  }
  const auto g = gradient_check(net, x, t);
  CHECK(g.checked == net.n_params());
  CHECK(g.max_rel_error < 1e-4);

  ConvConfig hidden = tiny;
  hidden.dense = {6};
  hidden.split_channels = true;
  const auto g2 = gradient_check(ConvNet(hidden, s.shape, 52, 4), x, t);
  CHECK(g2.max_rel_error < 1e-4);
}

TEST_CASE("conv forward is shape-total and batch-independent") {
  const ConvNet net(ConvConfig{}, fmcw::WindowShape{}, 52, 1);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(5040, 5, [&] { return g(rng); });
  const Eigen::MatrixXd batch = net.forward(x);
  CHECK(batch.rows() == 52);
  CHECK(batch.cols() == 5);
  for (Eigen::Index j = 0; j < 5; ++j) {
    const Eigen::MatrixXd single = net.forward(x.col(j));
    CHECK((single.col(0) - batch.col(j)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(5039, 1)), ShapeError);
  CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(60 * 85, 1)), ShapeError);
}

TEST_CASE("conv overfits 32 windows and is seed-reproducible") {
  const auto small = slice_frames(cached_session(2), 600, 84 + 32);
  std::vector<const SessionData*> one{&small};
  ModelConfig mc;
  mc.kind = ModelKind::kConv;
  TrainConfig tc;
  tc.epochs = 150;
  tc.batch_size = 8;
  tc.learning_rate = 3e-3;
  const auto a = train_conv(one, mc, tc);
  CHECK(session_mae(a.model, small) < 5.0);
  CHECK(a.curve.size() == 150);
  CHECK(a.curve.back().loss < a.curve.front().loss);

  tc.epochs = 3;
  const auto r1 = train_conv(one, mc, tc);
  const auto r2 = train_conv(one, mc, tc);
  CHECK(r1.curve.back().loss == r2.curve.back().loss);
  CHECK(r1.model.conv.params() == r2.model.conv.params());
}

TEST_CASE("training divergence aborts with a diagnostic") {
  auto bad = slice_frames(cached_session(0), 0, 200);
  bad.columns(3, 50) = std::numeric_limits<double>::quiet_NaN();
  std::vector<const SessionData*> one{&bad};
  ModelConfig mc;
  mc.kind = ModelKind::kConv;
  mc.conv.blocks = {{2, 2}};
  TrainConfig tc;
  tc.epochs = 1;
  tc.shuffle = false;
  CHECK_THROWS_AS(train_conv(one, mc, tc), TrainingDiverged);
}

TEST_CASE("model artifacts round trip and fine-tuning is non-destructive") {
  const auto dir = std::filesystem::temp_directory_path() / "echoface_model_test";
  std::filesystem::create_directories(dir);
  const auto& s = cached_session(0);
  const auto head = slice_frames(s, 0, 400);
  std::vector<const SessionData*> one{&head};

  ModelConfig mc;
  mc.kind = ModelKind::kConv;
  mc.conv.blocks = {{4, 2}, {8, 2}};
  TrainConfig tc;
  tc.epochs = 1;
  const Model base = train_conv(one, mc, tc).model;
  save_model(dir / "conv.efm", base);
  const auto before = file_bytes(dir / "conv.efm");
  const Model loaded = load_model(dir / "conv.efm");
  CHECK(loaded.conv.params() == base.conv.params());
  CHECK(loaded.predict_session(head) == base.predict_session(head));

  TrainConfig none = tc;
  none.epochs = 0;
  const Model same = fine_tune(loaded, one, none).model;
  CHECK(same.conv.params() == loaded.conv.params());
  const Model moved = fine_tune(loaded, one, tc).model;
  CHECK(moved.conv.params() != loaded.conv.params());
  CHECK(loaded.conv.params() == base.conv.params());
  CHECK(file_bytes(dir / "conv.efm") == before);

  const Model ridge = train_ridge(one, ModelConfig{});
  save_model(dir / "ridge.efm", ridge);
  const Model rl = load_model(dir / "ridge.efm");
  CHECK(rl.predict_session(head) == ridge.predict_session(head));
  CHECK(rl.config.ridge.lambda == ridge.config.ridge.lambda);

  {
    std::fstream f(dir / "ridge.efm", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const std::uint32_t v = 99;
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  CHECK_THROWS_AS(load_model(dir / "ridge.efm"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("fold construction and split hygiene") {
  std::vector<SessionData> ss;
  for (int i = 0; i < 12; ++i) ss.push_back(fake_session(90, static_cast<std::uint64_t>(i), "s" + std::to_string(i)));
  for (int i = 0; i < 12; ++i) ss[static_cast<std::size_t>(i)].participant = "p" + std::to_string(i / 3);
  std::vector<const SessionData*> ptr;
  for (auto& s : ss) ptr.push_back(&s);

  const auto folds = make_folds(ptr, {});
  REQUIRE(folds.size() == 6);
  std::vector<int> tested(12, 0);
  for (const auto& f : folds) {
    CHECK(f.test.size() == 2);
    CHECK(f.train.size() == 10);
    for (std::size_t i : f.test) ++tested[i];
  }
  for (int t : tested) CHECK(t == 1);

  CrossvalScheme shuffled;
  shuffled.shuffle = true;
  shuffled.seed = 5;
  const auto a = make_folds(ptr, shuffled), b = make_folds(ptr, shuffled);
  for (std::size_t f = 0; f < a.size(); ++f) CHECK(a[f].test == b[f].test);

  CrossvalScheme lopo;
  lopo.kind = SchemeKind::kLeaveOneParticipantOut;
  const auto lf = make_folds(ptr, lopo);
  CHECK(lf.size() == 4);
  for (const auto& f : lf) CHECK(f.test.size() == 3);

  CrossvalScheme too_many;
  too_many.folds = 13;
  CHECK_THROWS_AS(make_folds(ptr, too_many), ConfigError);
  CHECK_THROWS_AS(make_folds(std::span<const SessionData* const>(ptr.data(), 1), {}), ConfigError);

  ss[1].session_id = "s0";
  Fold leak{{0}, {1}};
  CHECK_THROWS_AS(assert_split_hygiene(ptr, leak), std::logic_error);
}

TEST_CASE("ridge cross-validation by subtraction equals retraining per fold") {
  std::vector<SessionData> ss;
  for (int i = 0; i < 4; ++i) ss.push_back(narrow(cached_session(i), 5, 8));
  std::vector<const SessionData*> ptr;
  for (auto& s : ss) ptr.push_back(&s);
  CrossvalScheme sch;
  sch.folds = 4;
  ModelConfig cfg;
  const auto fast = crossval_ridge(ptr, sch, cfg);
  const auto slow = crossval(ptr, sch, [&](SessionList train, std::size_t) { return train_ridge(train, cfg); });
  REQUIRE(fast.folds.size() == 4);
  for (std::size_t f = 0; f < 4; ++f) CHECK(fast.folds[f].report.mae == doctest::Approx(slow.folds[f].report.mae).epsilon(1e-6));
  CHECK(fast.mean.mae == doctest::Approx(slow.mean.mae).epsilon(1e-6));
  CHECK(fast.pooled.frames == fast.mean.frames);

  const auto again = crossval_ridge(ptr, sch, cfg);
  CHECK(again.mean.mae == fast.mean.mae);
}

TEST_CASE("head split hands over at the first frame after the head") {
  const auto& s = cached_session(0);
  const auto [head, tail] = split_head(s, 30.0 * 0.5);
  const auto n = static_cast<std::size_t>(std::llround(15.0 * s.frame_rate));
  CHECK(head.n_frames() == n);
  CHECK(tail.frame_of(0) + (n - s.shape.n_frames) == n);
  CHECK(tail.columns.col(1) == s.columns.col(static_cast<Eigen::Index>(n - s.shape.n_frames + 1)));
  CHECK(tail.target(0) == s.gt.row(static_cast<Eigen::Index>(n)));
}
