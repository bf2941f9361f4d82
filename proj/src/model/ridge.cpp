#include "echoface/model/ridge.hpp"

#include <cmath>

#include "echoface/common/error.hpp"

namespace echoface::model {

const char* target_mode_name(TargetMode m) { return m == TargetMode::kChange ? "change" : "absolute"; }

TargetMode parse_target_mode(std::string_view s) {
  if (s == "change") return TargetMode::kChange;
  if (s == "absolute") return TargetMode::kAbsolute;
  throw ConfigError("unknown target mode '" + std::string(s) + "' (expected change or absolute)");
}

void RidgeConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("ridge lambda must be a finite value >= 0");
  for (int k : shifts)
    if (k == 0 || std::abs(k) > 3) throw ConfigError("ridge augmentation shifts must be nonzero with |k| <= 3");
}

void GramStats::add(const GramStats& o) {
  if (o.n == 0.0) return;
  if (n == 0.0 && xtx.size() == 0) {
    *this = o;
    return;
  }
  if (dim() != o.dim() || outputs() != o.outputs()) throw ShapeError("Gram statistics of different shapes");
  n += o.n;
  xtx += o.xtx;
  xsum += o.xsum;
  xty += o.xty;
  ysum += o.ysum;
  ysq += o.ysq;
}

void GramStats::subtract(const GramStats& o) {
  if (dim() != o.dim() || outputs() != o.outputs()) throw ShapeError("Gram statistics of different shapes");
  if (o.n > n) throw DataError("subtracting more windows than the statistics hold");
  n -= o.n;
  xtx -= o.xtx;
  xsum -= o.xsum;
  xty -= o.xty;
  ysum -= o.ysum;
  ysq -= o.ysq;
}

Eigen::MatrixXd window_targets(const SessionData& s, TargetMode mode, std::span<const std::size_t> outputs) {
  const auto m = static_cast<Eigen::Index>(s.n_windows());
  const auto w = static_cast<Eigen::Index>(s.shape.n_frames);
  Eigen::MatrixXd y(m, static_cast<Eigen::Index>(outputs.size()));
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(outputs[j]);
    if (outputs[j] >= face::kNumBlendshapes) throw ShapeError("output index out of range");
    y.col(static_cast<Eigen::Index>(j)) = s.gt.col(c).segment(w, m);
    if (mode == TargetMode::kChange) y.col(static_cast<Eigen::Index>(j)) -= s.gt.col(c).segment(0, m);
  }
  return y;
}

namespace {

GramStats target_moments(const Eigen::MatrixXd& y) {
  GramStats g;
  g.n = static_cast<double>(y.rows());
  g.ysum = y.colwise().sum();
  g.ysq = y.array().square().colwise().sum().matrix();
  return g;
}

}  // namespace

GramStats session_gram(const SessionData& s, TargetMode mode, std::span<const std::size_t> outputs) {
  s.validate();
  const Eigen::Index m = static_cast<Eigen::Index>(s.n_windows());
  if (m == 0) throw DataError("session '" + s.session_id + "' has no windows");
  const Eigen::Index r = s.columns.rows();
  const Eigen::Index w = static_cast<Eigen::Index>(s.shape.n_frames);
  const Eigen::Index d = r * w;
  const Eigen::MatrixXd& c = s.columns;
  const Eigen::MatrixXd y = window_targets(s, mode, outputs);

  GramStats g = target_moments(y);
  g.xtx.resize(d, d);
  g.xsum.resize(d);
  g.xty.resize(d, y.cols());

  // Window i covers columns i+1..i+w, so offset a spans columns a+1..a+m.
  Eigen::VectorXd run = c.middleCols(1, m).rowwise().sum();
  for (Eigen::Index a = 0; a < w; ++a) {
    if (a > 0) run += c.col(a + m) - c.col(a);
    g.xsum.segment(a * r, r) = run;
    g.xty.middleRows(a * r, r).noalias() = c.middleCols(a + 1, m) * y;
  }

  Eigen::MatrixXd lag(r, r);
  for (Eigen::Index delta = 0; delta < w; ++delta) {
    lag.noalias() = c.middleCols(1, m) * c.middleCols(1 + delta, m).transpose();
    for (Eigen::Index a = 0; a + delta < w; ++a) {
      if (a > 0) {
        lag.noalias() -= c.col(a) * c.col(a + delta).transpose();
        lag.noalias() += c.col(a + m) * c.col(a + m + delta).transpose();
      }
      const Eigen::Index b = a + delta;
      g.xtx.block(a * r, b * r, r, r) = lag;
      if (delta > 0) g.xtx.block(b * r, a * r, r, r) = lag.transpose();
    }
  }
  return g;
}

GramStats session_gram_direct(const SessionData& s, TargetMode mode, std::span<const std::size_t> outputs) {
  s.validate();
  const Eigen::Index m = static_cast<Eigen::Index>(s.n_windows());
  if (m == 0) throw DataError("session '" + s.session_id + "' has no windows");
  const Eigen::Index d = static_cast<Eigen::Index>(s.shape.size());
  const Eigen::MatrixXd y = window_targets(s, mode, outputs);
  GramStats g = target_moments(y);
  g.xtx = Eigen::MatrixXd::Zero(d, d);
  g.xsum = Eigen::VectorXd::Zero(d);
  g.xty = Eigen::MatrixXd::Zero(d, y.cols());

  constexpr Eigen::Index kChunk = 256;
  Eigen::MatrixXd x(d, kChunk);
  for (Eigen::Index i0 = 0; i0 < m; i0 += kChunk) {
    const Eigen::Index k = std::min(kChunk, m - i0);
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto win = s.window(static_cast<std::size_t>(i0 + j));
      x.col(j) = Eigen::Map<const Eigen::VectorXd>(Eigen::MatrixXd(win).data(), d);
    }
    const auto xb = x.leftCols(k);
    g.xtx.selfadjointView<Eigen::Lower>().rankUpdate(xb);
    g.xsum += xb.rowwise().sum();
    g.xty.noalias() += xb * y.middleRows(i0, k);
  }
  g.xtx.triangularView<Eigen::StrictlyUpper>() = g.xtx.transpose();
  return g;
}

namespace {

Eigen::VectorXd expanded_inverse_scale(const NormStats& norm, const fmcw::WindowShape& shape) {
  const auto r = static_cast<Eigen::Index>(shape.rows());
  if (norm.mean.size() != r) throw ShapeError("normalization statistics do not match the window rows");
  const Eigen::VectorXd inv = norm.scale.cwiseInverse();
  return inv.replicate(static_cast<Eigen::Index>(shape.n_frames), 1);
}

// Solves (D(Cxx)D + lambda I) w = D Cxy + lambda * prior.
RidgeWeights solve_impl(const GramStats& g, const NormStats& norm, const fmcw::WindowShape& shape,
                        const RidgeConfig& cfg, const RidgeWeights* prior) {
  cfg.validate();
  const auto d = static_cast<Eigen::Index>(shape.size());
  if (g.dim() != static_cast<std::size_t>(d)) throw ShapeError("Gram statistics do not match the window shape");
  if (g.n < 1.0) throw DataError("ridge needs at least one window");
  const Eigen::VectorXd dinv = expanded_inverse_scale(norm, shape);
  const Eigen::VectorXd mu = g.xsum / g.n;
  const Eigen::RowVectorXd ybar = g.ysum / g.n;

  Eigen::MatrixXd a = g.xtx;
  a.noalias() -= g.n * mu * mu.transpose();
  a.array().colwise() *= dinv.array();
  a.array().rowwise() *= dinv.transpose().array();
  Eigen::MatrixXd rhs = g.xty;
  rhs.noalias() -= mu * g.ysum;
  rhs.array().colwise() *= dinv.array();

  double lambda = cfg.lambda;
  if (cfg.relative_lambda) lambda *= std::max(a.diagonal().mean(), 0.0);
  a.diagonal().array() += lambda;
  if (prior) {
    if (prior->w.rows() != d || prior->w.cols() != rhs.cols()) throw ShapeError("ridge prior has the wrong shape");
    rhs += lambda * prior->w;
  }

  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(a);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (!(rcond > 1e-13)) {
    throw DataError("ridge normal matrix is singular or ill-conditioned (rcond " + std::to_string(rcond) +
                    "); use lambda > 0");
  }
  RidgeWeights out;
  out.w = llt.solve(rhs);
  out.effective_lambda = lambda;
  const Eigen::VectorXd mu_n =
      (mu - norm.mean.replicate(static_cast<Eigen::Index>(shape.n_frames), 1)).cwiseProduct(dinv);
  out.bias = ybar - mu_n.transpose() * out.w;
  return out;
}

}  // namespace

RidgeWeights solve_ridge(const GramStats& g, const NormStats& norm, const fmcw::WindowShape& shape,
                         const RidgeConfig& cfg) {
  return solve_impl(g, norm, shape, cfg, nullptr);
}

RidgeWeights solve_ridge_toward(const GramStats& g, const NormStats& norm, const fmcw::WindowShape& shape,
                                const RidgeConfig& cfg, const RidgeWeights& prior) {
  return solve_impl(g, norm, shape, cfg, &prior);
}

Eigen::MatrixXd ridge_predict_session(const RidgeWeights& rw, const NormStats& norm, const SessionData& s) {
  const Eigen::Index r = s.columns.rows();
  const Eigen::Index w = static_cast<Eigen::Index>(s.shape.n_frames);
  const Eigen::Index m = static_cast<Eigen::Index>(s.n_windows());
  if (rw.w.rows() != r * w) throw ShapeError("ridge weights do not match the session window shape");
  Eigen::MatrixXd cn = s.columns;
  norm.apply(cn);
  Eigen::MatrixXd pred = rw.bias.replicate(m, 1);
  for (Eigen::Index a = 0; a < w; ++a)
    pred.noalias() += cn.middleCols(a + 1, m).transpose() * rw.w.middleRows(a * r, r);
  return pred;
}

}  // namespace echoface::model
