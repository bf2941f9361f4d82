#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "echoface/fmcw/window.hpp"

namespace echoface::model {

struct ConvBlock {
  int filters = 16;
  int stride = 2;
  bool operator==(const ConvBlock&) const = default;
};

/// 3x3 convolutions with zero padding and SiLU, global average pooling, then
/// optional SiLU dense layers and a linear output layer.
struct ConvConfig {
  std::vector<ConvBlock> blocks{{16, 2}, {32, 2}, {64, 2}};
  std::vector<int> dense;
  /// Feed the two receiver channels as separate 30-row planes instead of one
  /// 60-row plane.
  bool split_channels = false;
  /// Extra input plane holding each row's position within its channel block
  /// (-1 at the transducer, +1 at the truncation edge). Pooling discards
  /// position, so without it similar echoes at different ranges look alike.
  bool position_channel = true;
  void validate() const;
  bool operator==(const ConvConfig&) const = default;
};

/// Parameter storage with a fixed base alignment, so vectorized reductions
/// split identically from run to run.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

class ConvNet {
 public:
  /// Activations kept by forward_train for the backward pass.
  struct Cache {
    std::size_t batch = 0;
    std::vector<Eigen::MatrixXd> cols;  // im2col per conv layer
    std::vector<Eigen::MatrixXd> pre;   // pre-activations per conv layer
    std::vector<Eigen::MatrixXd> dense_in;
    std::vector<Eigen::MatrixXd> dense_pre;
  };

  ConvNet() = default;
  ConvNet(const ConvConfig& cfg, const fmcw::WindowShape& shape, std::size_t n_outputs, std::uint64_t seed);

  const ConvConfig& config() const { return cfg_; }
  const fmcw::WindowShape& shape() const { return shape_; }
  std::size_t n_outputs() const { return n_out_; }
  std::size_t n_params() const { return params_.size(); }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }
  bool empty() const { return params_.empty(); }

  /// x holds one flattened (column-major) window per column; rejects any
  /// other height before doing arithmetic. Returns n_outputs x batch.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward_train(const Eigen::MatrixXd& x, Cache& cache) const;
  /// Adds d(loss)/d(params) into grad given d(loss)/d(output).
  void backward(const Cache& cache, const Eigen::MatrixXd& dout, ParamVector& grad) const;

 private:
  struct ConvLayer {
    int cin, cout, stride;
    int hin, win, hout, wout;
    std::size_t w_off, b_off;
  };
  struct DenseLayer {
    int in, out;
    bool activation;
    std::size_t w_off, b_off;
  };

  Eigen::MatrixXd input_planes(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd run(const Eigen::MatrixXd& x, Cache* cache) const;

  ConvConfig cfg_;
  fmcw::WindowShape shape_;
  std::size_t n_out_ = 0;
  std::vector<ConvLayer> conv_;
  std::vector<DenseLayer> dense_;
  ParamVector params_;
};

/// Maximum relative error between analytic gradients of the mean absolute
/// error loss and central finite differences, over every parameter.
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t checked = 0;
};
GradCheckResult gradient_check(const ConvNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target,
                               double eps = 1e-4);

/// Mean absolute error loss and its gradient with respect to the output.
double l1_loss(const Eigen::MatrixXd& out, const Eigen::MatrixXd& target, Eigen::MatrixXd* dout);

}  // namespace echoface::model
