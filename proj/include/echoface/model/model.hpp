#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "echoface/face/blendshape.hpp"
#include "echoface/model/conv.hpp"
#include "echoface/model/dataset.hpp"
#include "echoface/model/normalization.hpp"
#include "echoface/model/ridge.hpp"

namespace echoface::model {

enum class ModelKind : std::uint8_t { kRidge = 0, kConv = 1 };
const char* model_kind_name(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

std::vector<std::size_t> all_outputs();
std::vector<std::size_t> blink_outputs();  // eyeBlink_L, eyeBlink_R

struct ModelConfig {
  ModelKind kind = ModelKind::kRidge;
  ConvConfig conv;
  RidgeConfig ridge;
  TargetMode target = TargetMode::kChange;
  /// Blendshape indices the model regresses; the rest are reported as 0.
  std::vector<std::size_t> outputs = all_outputs();
  void validate() const;
};

/// Trained regressor with everything needed to predict from raw windows.
struct Model {
  ModelConfig config;
  fmcw::WindowShape shape;
  NormStats norm;
  /// Added to change predictions (per-output training minimum).
  Eigen::RowVectorXd rest;
  /// Conv outputs are (target - offset) / target_scale.
  Eigen::RowVectorXd offset;
  double target_scale = 100.0;
  RidgeWeights ridge;
  ConvNet conv;

  std::size_t n_outputs() const { return config.outputs.size(); }

  /// Targets for raw (unnormalized) flattened windows, one per column,
  /// before rest and clamping. Returns batch x outputs.
  Eigen::MatrixXd raw_outputs(const Eigen::MatrixXd& flat_windows) const;
  /// Clamped predictions of the modelled outputs, batch x outputs.
  Eigen::MatrixXd predict_flat(const Eigen::MatrixXd& flat_windows) const;
  face::BlendshapeVector predict(const fmcw::EchoWindow& w) const;
  /// Predictions for every window of a session (n_windows x outputs).
  Eigen::MatrixXd predict_session(const SessionData& s) const;
  /// Expands outputs to 52 columns (unmodelled ones 0).
  Eigen::MatrixXd expand(const Eigen::MatrixXd& outputs) const;
  void check_window_shape(std::size_t rows, std::size_t cols) const;
};

/// "EFMD" magic, u32 version, u32 length + JSON config, then tensors as
/// {u32 name length, name, u64 count, count f64}.
void save_model(const std::filesystem::path& path, const Model& m);
Model load_model(const std::filesystem::path& path);
inline constexpr std::uint32_t kModelFormatVersion = 1;

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace echoface::model
