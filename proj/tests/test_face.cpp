#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "echoface/common/error.hpp"
#include "echoface/face/blendshape.hpp"
#include "echoface/face/metrics.hpp"

using namespace echoface;
using namespace echoface::face;

namespace {
BlendshapeVector random_vec(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  BlendshapeVector v{};
  for (auto& x : v) x = u(rng);
  return v;
}
}  // namespace

TEST_CASE("partitions") {
  CHECK(kLowerIndices.size() == 33);
  CHECK(kUpperIndices.size() == 19);
  std::set<std::size_t> all(kLowerIndices.begin(), kLowerIndices.end());
  for (auto i : kUpperIndices) CHECK(all.insert(i).second);
  CHECK(all.size() == 52);
  for (auto i : kUpperIndices) {
    const auto n = kBlendshapeNames[i];
    CHECK((n.starts_with("eye") || n.starts_with("brow")));
  }
  CHECK(std::set<std::string_view>(kBlendshapeNames.begin(), kBlendshapeNames.end()).size() == 52);
  CHECK(kBlendshapeNames[kEyeBlinkL] == "eyeBlink_L");
  CHECK(kBlendshapeNames[kEyeBlinkR] == "eyeBlink_R");
  CHECK(index_of("tongueOut").value() == 51);
  CHECK_FALSE(index_of("nope").has_value());
  CHECK_THROWS_AS(require_index("nope"), ConfigError);
}

TEST_CASE("ARKit scaling and clamping") {
  std::vector<double> raw(52, 0.25);
  raw[0] = 0.0;
  raw[1] = 1.0;
  raw[2] = 1.2;
  raw[3] = -0.1;
  ClampCounter cc;
  const auto v = scale_arkit(raw, &cc);
  CHECK(v[4] == 250.0);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 1000.0);
  CHECK(v[2] == 1000.0);
  CHECK(v[3] == 0.0);
  CHECK(cc.clamped == 2);
  CHECK_THROWS_AS(scale_arkit(std::vector<double>(51, 0.0)), ShapeError);
}

TEST_CASE("error metrics examples") {
  std::mt19937_64 rng(1);
  const auto g = random_vec(rng);
  CHECK(mae(g, g) == 0.0);
  auto p = g;
  for (auto& x : p) x += 40.0;
  CHECK(mae(p, g) == doctest::Approx(40.0));
  CHECK(lmae(p, g) == doctest::Approx(40.0));
  CHECK(umae(p, g) == doctest::Approx(40.0));
}

TEST_CASE("MAE decomposes into LMAE and UMAE on 10^4 random pairs") {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = random_vec(rng), b = random_vec(rng);
    worst = std::max(worst, std::abs(mae(a, b) - (33.0 * lmae(a, b) + 19.0 * umae(a, b)) / 52.0));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("metrics are permutation-invariant within each partition") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_vec(rng), b = random_vec(rng);
    auto pa = a, pb = b;
    std::vector<std::size_t> lower(kLowerIndices.begin(), kLowerIndices.end());
    auto perm = lower;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < lower.size(); ++i) {
      pa[lower[i]] = a[perm[i]];
      pb[lower[i]] = b[perm[i]];
    }
    CHECK(lmae(pa, pb) == doctest::Approx(lmae(a, b)).epsilon(1e-12));
    CHECK(umae(pa, pb) == umae(a, b));
    CHECK(mae(pa, pb) == doctest::Approx(mae(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("PL40 and PU60") {
  CHECK(pl40(std::vector<double>{10, 39, 41}) == doctest::Approx(200.0 / 3.0));
  CHECK(pl40(std::vector<double>{0, 0, 0}) == 100.0);
  CHECK(pl40(std::vector<double>{40.0}) == 0.0);  // strict
  CHECK(pu60(std::vector<double>{59.999, 60.0}) == 50.0);
  CHECK_THROWS_AS(pl40(std::vector<double>{}), DataError);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 120.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + t);
    for (auto& x : v) x = u(rng);
    std::size_t below40 = 0, below60 = 0;
    for (double x : v) {
      if (x < 40.0) ++below40;
      if (x < 60.0) ++below60;
    }
    CHECK(pl40(v) == doctest::Approx(100.0 * below40 / v.size()));
    CHECK(pu60(v) == doctest::Approx(100.0 * below60 / v.size()));
    CHECK(percent_below(v, 41.0) >= pl40(v));
  }
}

TEST_CASE("degree and buckets") {
  BlendshapeVector z{};
  CHECK(deformation_degree(z) == 0.0);
  CHECK(bucket_of(deformation_degree(z)) == 0);
  BlendshapeVector m{};
  m.fill(1000.0);
  CHECK(deformation_degree(m) == 1000.0);
  CHECK(part_degree(m, Part::kLower) == 1000.0);
  const auto h = bucketize(std::vector<double>{40, 60, 120, 200});
  for (double f : h.fractions) CHECK(f == 0.25);
  CHECK(bucket_of(50.0) == 1);
  CHECK(bucket_of(150.0) == 3);
}

TEST_CASE("report aggregates frames") {
  Eigen::MatrixXd gt = Eigen::MatrixXd::Zero(4, 52);
  gt.row(1).setConstant(75.0);
  gt.row(2).setConstant(125.0);
  gt.row(3).setConstant(300.0);
  Eigen::MatrixXd pred = gt.array() + 10.0;
  pred(0, 0) = 62.0;  // upper: eyeBlink_L off by 62
  const auto r = evaluate(pred, gt);
  CHECK(r.frames == 4);
  for (const auto& b : r.buckets) CHECK(b.frames == 1);
  CHECK(r.pl40 == 100.0);
  CHECK(r.pu60 == 100.0);
  CHECK(r.mae == doctest::Approx((4 * 10.0 * 52 + 52.0) / (4 * 52)));
  const std::vector<MetricReport> parts = {evaluate(pred.topRows(1), gt.topRows(1)), evaluate(pred.bottomRows(3), gt.bottomRows(3))};
  const auto c = combine(parts);
  CHECK(c.mae == doctest::Approx(r.mae));
  CHECK(c.buckets[2].mae == doctest::Approx(r.buckets[2].mae));
  CHECK_THROWS_AS(evaluate(pred, gt.topRows(3)), ShapeError);
}

TEST_CASE("blendshape CSV round trip") {
  Eigen::MatrixXd v = (Eigen::MatrixXd::Random(5, 52).array() + 1.0) * 500.0;
  const auto t = make_table(v, 30.0);
  std::stringstream ss;
  write_blendshape_csv(ss, t);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  CHECK(header.rfind("frame_index,timestamp_s,eyeBlink_L,", 0) == 0);
  const auto back = read_blendshape_csv(ss);
  CHECK(back.values == v);
  CHECK(back.frame_index == t.frame_index);
  CHECK(back.timestamp_s == t.timestamp_s);
  std::stringstream bad("frame_index,timestamp_s,foo\n");
  CHECK_THROWS_AS(read_blendshape_csv(bad), DataError);
}
