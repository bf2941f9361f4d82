#include "echoface/blink/detector.hpp"

#include "echoface/common/error.hpp"

namespace echoface::blink {

model::ModelConfig blink_model_config() {
  model::ModelConfig c;
  c.kind = model::ModelKind::kConv;
  c.conv.blocks = {{8, 2}, {16, 2}, {32, 2}};
  c.outputs = model::blink_outputs();
  return c;
}

model::TrainConfig blink_train_config() {
  model::TrainConfig t;
  t.epochs = 12;
  t.batch_size = 32;
  t.learning_rate = 1e-2;
  t.window_stride = 2;
  t.max_vertical_shift = 2;
  // Blinks cover a small share of windows; revisit them so the fit leaves the
  // all-zero predictor early.
  t.active_repeat = 4;
  return t;
}

model::TrainResult train_blink_model(model::SessionList sessions, const model::ModelConfig& cfg,
                                     const model::TrainConfig& train_cfg, model::SessionList validation) {
  if (cfg.outputs != model::blink_outputs()) throw ConfigError("blink models regress exactly eyeBlink_L and eyeBlink_R");
  return model::train_conv(sessions, cfg, train_cfg, validation);
}

std::vector<double> predicted_blink_signal(const model::Model& m, const model::SessionData& s) {
  const auto& outs = m.config.outputs;
  std::ptrdiff_t left = -1, right = -1;
  for (std::size_t j = 0; j < outs.size(); ++j) {
    if (outs[j] == face::kEyeBlinkL) left = static_cast<std::ptrdiff_t>(j);
    if (outs[j] == face::kEyeBlinkR) right = static_cast<std::ptrdiff_t>(j);
  }
  if (left < 0 || right < 0) throw ConfigError("model does not predict both eyeBlink parameters");
  const Eigen::MatrixXd pred = m.predict_session(s);
  return blink_signal(Eigen::VectorXd(pred.col(left)), Eigen::VectorXd(pred.col(right)));
}

std::vector<BlinkEvent> predicted_events(const model::Model& m, const model::SessionData& s, ExtractorConfig cfg) {
  cfg.frame_rate = s.frame_rate;
  return extract_events(predicted_blink_signal(m, s), cfg, static_cast<std::int64_t>(s.shape.n_frames));
}

std::vector<BlinkEvent> truth_events(const model::SessionData& s, ExtractorConfig cfg) {
  cfg.frame_rate = s.frame_rate;
  const auto w = static_cast<Eigen::Index>(s.shape.n_frames);
  const Eigen::MatrixXd gt = s.gt.bottomRows(s.gt.rows() - w);
  return extract_events(blink_signal(gt), cfg, w);
}

MatchResult evaluate_blinks(const model::Model& m, const model::SessionData& s, const ExtractorConfig& cfg,
                            double tolerance_s) {
  const auto pred = predicted_events(m, s, cfg);
  const auto gt = truth_events(s, cfg);
  return match_and_f1(pred, gt, s.frame_rate, tolerance_s);
}

}  // namespace echoface::blink
