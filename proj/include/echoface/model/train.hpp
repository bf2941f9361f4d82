#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "echoface/common/error.hpp"
#include "echoface/model/augment.hpp"
#include "echoface/model/model.hpp"

namespace echoface::model {

/// Loss became non-finite during training.
class TrainingDiverged : public DataError {
 public:
  using DataError::DataError;
};

/// Adam with a cosine learning-rate decay from learning_rate down to
/// learning_rate * final_lr_fraction over all steps.
struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 2e-3;
  double final_lr_fraction = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  bool shuffle = true;
  /// Use every n-th window of each session.
  std::size_t window_stride = 1;
  /// Per-window vertical shift drawn uniformly from [-k, k]; 0 disables.
  int max_vertical_shift = 0;
  /// Scale of motion-bank excerpts added to inputs; 0 disables.
  double motion_scale = 0.0;
  /// Conv targets are divided by this after subtracting their mean.
  double target_scale = 100.0;
  /// Windows whose target leaves the offset by more than active_threshold
  /// (scaled units, any output) are visited this many times per epoch. Rare
  /// events otherwise leave an L1 fit stuck on the constant predictor.
  std::size_t active_repeat = 1;
  double active_threshold = 100.0;
  /// Validation is evaluated on every n-th window.
  std::size_t val_stride = 4;
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;     // mean absolute error in model units
  double val_mae = 0.0;  // scaled units over the modelled outputs; NaN without validation data
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> curve;
};

using SessionList = std::span<const SessionData* const>;
using ProgressFn = std::function<void(const EpochRecord&)>;

/// Per-output minimum of the training ground truth.
Eigen::RowVectorXd training_rest(SessionList sessions, std::span<const std::size_t> outputs);

/// Gram statistics of a session plus its configured shifted copies.
GramStats training_gram(const SessionData& s, const ModelConfig& cfg);

Model train_ridge(SessionList sessions, const ModelConfig& cfg);
/// Ridge from precomputed statistics (cross-validation reuses fold Grams).
Model ridge_from_stats(const GramStats& g, const NormStats& norm, const Eigen::RowVectorXd& rest,
                       const fmcw::WindowShape& shape, const ModelConfig& cfg);

TrainResult train_conv(SessionList sessions, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       SessionList validation = {}, const MotionBank* bank = nullptr, const ProgressFn& progress = {});

/// Continues from `base` on new sessions. Conv models resume with the given
/// schedule (callers usually lower the learning rate); ridge models re-solve
/// with the penalty centred on the existing weights. `base` is not modified.
TrainResult fine_tune(const Model& base, SessionList sessions, const TrainConfig& train_cfg,
                      SessionList validation = {}, const MotionBank* bank = nullptr);

/// Mean |pred - gt| of the modelled outputs over every window (stride).
double session_mae(const Model& m, const SessionData& s);

void write_training_report(std::ostream& os, std::span<const EpochRecord> curve);

}  // namespace echoface::model
