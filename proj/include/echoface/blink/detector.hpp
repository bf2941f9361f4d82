#pragma once

#include <vector>

#include "echoface/blink/blink.hpp"
#include "echoface/model/train.hpp"

namespace echoface::blink {

/// Conv model restricted to the two eyeBlink outputs.
model::ModelConfig blink_model_config();
/// Compact defaults sized for the blink task.
model::TrainConfig blink_train_config();

model::TrainResult train_blink_model(model::SessionList sessions, const model::ModelConfig& cfg,
                                     const model::TrainConfig& train_cfg, model::SessionList validation = {});

/// Blink signal of a model's predictions for every window of the session;
/// element i belongs to frame s.frame_of(i).
std::vector<double> predicted_blink_signal(const model::Model& m, const model::SessionData& s);

std::vector<BlinkEvent> predicted_events(const model::Model& m, const model::SessionData& s,
                                         ExtractorConfig cfg = {});
/// Ground-truth events over the frames the model can score (from frame 84).
std::vector<BlinkEvent> truth_events(const model::SessionData& s, ExtractorConfig cfg = {});

MatchResult evaluate_blinks(const model::Model& m, const model::SessionData& s, const ExtractorConfig& cfg = {},
                            double tolerance_s = 0.15);

}  // namespace echoface::blink
