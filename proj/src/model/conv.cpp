#include "echoface/model/conv.hpp"

#include <cmath>
#include <random>

#include "echoface/common/error.hpp"

namespace echoface::model {

namespace {

constexpr int kKernel = 3;
constexpr int kTaps = kKernel * kKernel;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void silu_inplace(Eigen::MatrixXd& z) {
  z = z.unaryExpr([](double v) { return v * sigmoid(v); });
}

// dz = da * silu'(z)
void silu_backward(const Eigen::MatrixXd& z, Eigen::MatrixXd& da) {
  da.array() *= z.array().unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

// Standard normals from a 64-bit engine, independent of the library's
// distribution implementation.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Spatial layout: plane element (r, t) of an h x w plane sits at t * h + r,
// matching a column-major window.
void im2col(const Eigen::MatrixXd& in, int cin, int hin, int win, int stride, int hout, int wout,
            std::size_t batch, Eigen::MatrixXd& cols) {
  const Eigen::Index hw_in = static_cast<Eigen::Index>(hin) * win;
  const Eigen::Index hw_out = static_cast<Eigen::Index>(hout) * wout;
  cols.setZero(static_cast<Eigen::Index>(cin) * kTaps, static_cast<Eigen::Index>(batch) * hw_out);
  for (std::size_t b = 0; b < batch; ++b) {
    const Eigen::Index in_base = static_cast<Eigen::Index>(b) * hw_in;
    const Eigen::Index out_base = static_cast<Eigen::Index>(b) * hw_out;
    for (int ox = 0; ox < wout; ++ox) {
      for (int oy = 0; oy < hout; ++oy) {
        const Eigen::Index q = out_base + static_cast<Eigen::Index>(ox) * hout + oy;
        double* dst = cols.col(q).data();
        for (int kx = 0; kx < kKernel; ++kx) {
          const int t = ox * stride + kx - 1;
          if (t < 0 || t >= win) continue;
          for (int ky = 0; ky < kKernel; ++ky) {
            const int r = oy * stride + ky - 1;
            if (r < 0 || r >= hin) continue;
            const Eigen::Index p = in_base + static_cast<Eigen::Index>(t) * hin + r;
            const int tap = ky * kKernel + kx;
            for (int c = 0; c < cin; ++c) dst[c * kTaps + tap] = in(c, p);
          }
        }
      }
    }
  }
}

void col2im(const Eigen::MatrixXd& cols, int cin, int hin, int win, int stride, int hout, int wout,
            std::size_t batch, Eigen::MatrixXd& out) {
  const Eigen::Index hw_in = static_cast<Eigen::Index>(hin) * win;
  const Eigen::Index hw_out = static_cast<Eigen::Index>(hout) * wout;
  out.setZero(cin, static_cast<Eigen::Index>(batch) * hw_in);
  for (std::size_t b = 0; b < batch; ++b) {
    const Eigen::Index in_base = static_cast<Eigen::Index>(b) * hw_in;
    const Eigen::Index out_base = static_cast<Eigen::Index>(b) * hw_out;
    for (int ox = 0; ox < wout; ++ox) {
      for (int oy = 0; oy < hout; ++oy) {
        const Eigen::Index q = out_base + static_cast<Eigen::Index>(ox) * hout + oy;
        const double* src = cols.col(q).data();
        for (int kx = 0; kx < kKernel; ++kx) {
          const int t = ox * stride + kx - 1;
          if (t < 0 || t >= win) continue;
          for (int ky = 0; ky < kKernel; ++ky) {
            const int r = oy * stride + ky - 1;
            if (r < 0 || r >= hin) continue;
            const Eigen::Index p = in_base + static_cast<Eigen::Index>(t) * hin + r;
            const int tap = ky * kKernel + kx;
            for (int c = 0; c < cin; ++c) out(c, p) += src[c * kTaps + tap];
          }
        }
      }
    }
  }
}

// Per-sample spatial mean: (c, b*hw + p) -> (c, b).
Eigen::MatrixXd global_average(const Eigen::MatrixXd& a, std::size_t batch, Eigen::Index hw) {
  Eigen::MatrixXd g(a.rows(), static_cast<Eigen::Index>(batch));
  for (std::size_t b = 0; b < batch; ++b)
    g.col(static_cast<Eigen::Index>(b)) = a.middleCols(static_cast<Eigen::Index>(b) * hw, hw).rowwise().mean();
  return g;
}

}  // namespace

void ConvConfig::validate() const {
  if (blocks.empty()) throw ConfigError("conv model needs at least one convolution block");
  for (const auto& b : blocks) {
    if (b.filters < 1) throw ConfigError("conv block filters must be >= 1");
    if (b.stride < 1 || b.stride > 4) throw ConfigError("conv block stride must be in 1..4");
  }
  for (int w : dense)
    if (w < 1) throw ConfigError("dense widths must be >= 1");
}

ConvNet::ConvNet(const ConvConfig& cfg, const fmcw::WindowShape& shape, std::size_t n_outputs, std::uint64_t seed)
    : cfg_(cfg), shape_(shape), n_out_(n_outputs) {
  cfg_.validate();
  if (n_outputs == 0) throw ConfigError("conv model needs at least one output");
  int c = (cfg.split_channels ? static_cast<int>(shape.n_channels) : 1) + (cfg.position_channel ? 1 : 0);
  int h = static_cast<int>(cfg.split_channels ? shape.n_bins : shape.rows());
  int w = static_cast<int>(shape.n_frames);
  std::size_t off = 0;
  for (const auto& b : cfg.blocks) {
    ConvLayer l{};
    l.cin = c;
    l.cout = b.filters;
    l.stride = b.stride;
    l.hin = h;
    l.win = w;
    l.hout = (h - 1) / b.stride + 1;
    l.wout = (w - 1) / b.stride + 1;
    l.w_off = off;
    off += static_cast<std::size_t>(l.cout) * l.cin * kTaps;
    l.b_off = off;
    off += static_cast<std::size_t>(l.cout);
    conv_.push_back(l);
    c = l.cout;
    h = l.hout;
    w = l.wout;
  }
  int in = c;
  for (std::size_t i = 0; i <= cfg.dense.size(); ++i) {
    DenseLayer d{};
    d.in = in;
    d.out = i < cfg.dense.size() ? cfg.dense[i] : static_cast<int>(n_outputs);
    d.activation = i < cfg.dense.size();
    d.w_off = off;
    off += static_cast<std::size_t>(d.out) * d.in;
    d.b_off = off;
    off += static_cast<std::size_t>(d.out);
    dense_.push_back(d);
    in = d.out;
  }
  params_.assign(off, 0.0);

  Gaussian gauss(seed);
  for (const auto& l : conv_) {
    const double sd = std::sqrt(2.0 / (l.cin * kTaps));
    for (std::size_t i = 0; i < static_cast<std::size_t>(l.cout) * l.cin * kTaps; ++i) params_[l.w_off + i] = sd * gauss();
  }
  for (const auto& d : dense_) {
    const double sd = d.activation ? std::sqrt(2.0 / d.in) : 0.1 * std::sqrt(1.0 / d.in);
    for (std::size_t i = 0; i < static_cast<std::size_t>(d.out) * d.in; ++i) params_[d.w_off + i] = sd * gauss();
  }
}

Eigen::MatrixXd ConvNet::input_planes(const Eigen::MatrixXd& x) const {
  if (empty()) throw ConfigError("conv model has no parameters");
  if (static_cast<std::size_t>(x.rows()) != shape_.size())
    throw ShapeError("conv input must be " + std::to_string(shape_.rows()) + "x" + std::to_string(shape_.n_frames) +
                     " windows (" + std::to_string(shape_.size()) + " values), got " + std::to_string(x.rows()));
  const Eigen::Index batch = x.cols();
  if (!cfg_.split_channels && !cfg_.position_channel) return Eigen::Map<const Eigen::MatrixXd>(x.data(), 1, x.size());
  const auto bins = static_cast<Eigen::Index>(shape_.n_bins);
  const auto rows = static_cast<Eigen::Index>(shape_.rows());
  const auto frames = static_cast<Eigen::Index>(shape_.n_frames);
  const Eigen::Index data_planes = cfg_.split_channels ? static_cast<Eigen::Index>(shape_.n_channels) : 1;
  const Eigen::Index h = cfg_.split_channels ? bins : rows;
  const Eigen::Index hw = h * frames;
  Eigen::MatrixXd planes(data_planes + (cfg_.position_channel ? 1 : 0), batch * hw);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index t = 0; t < frames; ++t)
      for (Eigen::Index c = 0; c < data_planes; ++c)
        for (Eigen::Index r = 0; r < h; ++r) planes(c, b * hw + t * h + r) = x(t * rows + c * h + r, b);
  if (cfg_.position_channel) {
    const double denom = bins > 1 ? static_cast<double>(bins - 1) : 1.0;
    for (Eigen::Index p = 0; p < batch * hw; ++p)
      planes(data_planes, p) = 2.0 * static_cast<double>((p % h) % bins) / denom - 1.0;
  }
  return planes;
}

Eigen::MatrixXd ConvNet::run(const Eigen::MatrixXd& x, Cache* cache) const {
  const auto batch = static_cast<std::size_t>(x.cols());
  Eigen::MatrixXd act = input_planes(x);
  if (cache) {
    cache->batch = batch;
    cache->cols.resize(conv_.size());
    cache->pre.resize(conv_.size());
    cache->dense_in.resize(dense_.size());
    cache->dense_pre.resize(dense_.size());
  }
  Eigen::MatrixXd cols;
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    const auto& l = conv_[i];
    Eigen::MatrixXd& c = cache ? cache->cols[i] : cols;
    im2col(act, l.cin, l.hin, l.win, l.stride, l.hout, l.wout, batch, c);
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + l.w_off, l.cout, static_cast<Eigen::Index>(l.cin) * kTaps);
    const Eigen::Map<const Eigen::VectorXd> bias(params_.data() + l.b_off, l.cout);
    Eigen::MatrixXd z = w * c;
    z.colwise() += bias;
    if (cache) cache->pre[i] = z;
    silu_inplace(z);
    act = std::move(z);
  }
  const auto& last = conv_.back();
  Eigen::MatrixXd h = global_average(act, batch, static_cast<Eigen::Index>(last.hout) * last.wout);
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    const auto& d = dense_[i];
    if (cache) cache->dense_in[i] = h;
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + d.w_off, d.out, d.in);
    const Eigen::Map<const Eigen::VectorXd> bias(params_.data() + d.b_off, d.out);
    Eigen::MatrixXd z = w * h;
    z.colwise() += bias;
    if (d.activation) {
      if (cache) cache->dense_pre[i] = z;
      silu_inplace(z);
    }
    h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd ConvNet::forward(const Eigen::MatrixXd& x) const { return run(x, nullptr); }

Eigen::MatrixXd ConvNet::forward_train(const Eigen::MatrixXd& x, Cache& cache) const { return run(x, &cache); }

void ConvNet::backward(const Cache& cache, const Eigen::MatrixXd& dout, ParamVector& grad) const {
  if (grad.size() != params_.size()) grad.assign(params_.size(), 0.0);
  const std::size_t batch = cache.batch;
  if (dout.rows() != static_cast<Eigen::Index>(n_out_) || dout.cols() != static_cast<Eigen::Index>(batch))
    throw ShapeError("output gradient has the wrong shape");

  Eigen::MatrixXd dh = dout;
  for (std::size_t i = dense_.size(); i-- > 0;) {
    const auto& d = dense_[i];
    if (d.activation) silu_backward(cache.dense_pre[i], dh);
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + d.w_off, d.out, d.in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + d.b_off, d.out);
    gw.noalias() += dh * cache.dense_in[i].transpose();
    gb += dh.rowwise().sum();
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + d.w_off, d.out, d.in);
    dh = w.transpose() * dh;
  }

  const auto& last = conv_.back();
  const Eigen::Index hw = static_cast<Eigen::Index>(last.hout) * last.wout;
  Eigen::MatrixXd da(last.cout, static_cast<Eigen::Index>(batch) * hw);
  for (std::size_t b = 0; b < batch; ++b)
    da.middleCols(static_cast<Eigen::Index>(b) * hw, hw) =
        (dh.col(static_cast<Eigen::Index>(b)) / static_cast<double>(hw)).replicate(1, hw);

  for (std::size_t i = conv_.size(); i-- > 0;) {
    const auto& l = conv_[i];
    silu_backward(cache.pre[i], da);
    const Eigen::Index k = static_cast<Eigen::Index>(l.cin) * kTaps;
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + l.w_off, l.cout, k);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + l.b_off, l.cout);
    gw.noalias() += da * cache.cols[i].transpose();
    gb += da.rowwise().sum();
    if (i == 0) break;
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + l.w_off, l.cout, k);
    const Eigen::MatrixXd dcols = w.transpose() * da;
    col2im(dcols, l.cin, l.hin, l.win, l.stride, l.hout, l.wout, batch, da);
  }
}

double l1_loss(const Eigen::MatrixXd& out, const Eigen::MatrixXd& target, Eigen::MatrixXd* dout) {
  if (out.rows() != target.rows() || out.cols() != target.cols()) throw ShapeError("loss operands differ in shape");
  const double n = static_cast<double>(out.size());
  const Eigen::ArrayXXd diff = (out - target).array();
  if (dout) *dout = (diff.sign() / n).matrix();
  return diff.abs().sum() / n;
}

GradCheckResult gradient_check(const ConvNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target, double eps) {
  ConvNet::Cache cache;
  Eigen::MatrixXd dout;
  l1_loss(net.forward_train(x, cache), target, &dout);
  ParamVector grad(net.n_params(), 0.0);
  net.backward(cache, dout, grad);

  ConvNet probe = net;
  GradCheckResult res;
  for (std::size_t i = 0; i < probe.n_params(); ++i) {
    const double keep = probe.params()[i];
    probe.params()[i] = keep + eps;
    const double up = l1_loss(probe.forward(x), target, nullptr);
    probe.params()[i] = keep - eps;
    const double down = l1_loss(probe.forward(x), target, nullptr);
    probe.params()[i] = keep;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
    const double rel = std::abs(numeric - grad[i]) / denom;
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_param = i;
    }
    ++res.checked;
  }
  return res;
}

}  // namespace echoface::model
