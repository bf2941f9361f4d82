#include "echoface/sim/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "echoface/common/error.hpp"
#include "echoface/sim/scene.hpp"

namespace echoface::sim {

using nlohmann::json;

void Trajectory::validate() const {
  if (frames.cols() != static_cast<Eigen::Index>(face::kNumBlendshapes)) throw ShapeError("trajectory needs 52 columns");
  if (!(frame_rate > 0.0)) throw ConfigError("trajectory frame rate must be positive");
  if (frames.size() > 0 && (frames.minCoeff() < 0.0 || frames.maxCoeff() > face::kScaledMax))
    throw DataError("trajectory values outside [0, 1000]");
}

namespace {

constexpr std::string_view kPresetIds[kNumPresets] = {
    "open-mouth", "o-mouth", "open-eyes", "close-eyes", "close-left-eye",
    "close-right-eye", "smile", "sneer-left", "sneer-right"};

// Action units: broad co-activation patterns, each reachable up to degree
// ~200 before any parameter saturates.
face::BlendshapeVector au_jaw() {
  return mix_from_pairs({{"jawOpen", 1}, {"mouthLowerDown_L", .5}, {"mouthLowerDown_R", .5},
                         {"mouthStretch_L", .3}, {"mouthStretch_R", .3}, {"mouthFunnel", .2}});
}
face::BlendshapeVector au_pucker() {
  return mix_from_pairs({{"mouthPucker", 1}, {"mouthFunnel", .8}, {"mouthRollLower", .3}, {"jawOpen", .15},
                         {"mouthClose", .3}});
}
face::BlendshapeVector au_smile() {
  return mix_from_pairs({{"mouthSmile_L", 1}, {"mouthSmile_R", 1}, {"cheekSquint_L", .6}, {"cheekSquint_R", .6},
                         {"mouthDimple_L", .4}, {"mouthDimple_R", .4}, {"eyeSquint_L", .3}, {"eyeSquint_R", .3}});
}
face::BlendshapeVector au_sneer_l() {
  return mix_from_pairs({{"noseSneer_L", 1}, {"mouthUpperUp_L", .7}, {"cheekSquint_L", .6}, {"browDown_L", .4},
                         {"eyeSquint_L", .4}, {"mouthLeft", .2}});
}
face::BlendshapeVector au_sneer_r() {
  return mix_from_pairs({{"noseSneer_R", 1}, {"mouthUpperUp_R", .7}, {"cheekSquint_R", .6}, {"browDown_R", .4},
                         {"eyeSquint_R", .4}, {"mouthRight", .2}});
}
face::BlendshapeVector au_close_l() {
  return mix_from_pairs({{"eyeBlink_L", 1}, {"eyeSquint_L", .25}, {"eyeLookDown_L", .2}, {"cheekSquint_L", .1}});
}
face::BlendshapeVector au_close_r() {
  return mix_from_pairs({{"eyeBlink_R", 1}, {"eyeSquint_R", .25}, {"eyeLookDown_R", .2}, {"cheekSquint_R", .1}});
}
face::BlendshapeVector au_wide() {
  return mix_from_pairs({{"eyeWide_L", 1}, {"eyeWide_R", 1}, {"browInnerUp", .8}, {"browOuterUp_L", .6},
                         {"browOuterUp_R", .6}});
}

face::BlendshapeVector add(face::BlendshapeVector a, const face::BlendshapeVector& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  // Explicit mapping keeps sequences identical across standard libraries.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

std::string_view preset_id(Preset p) { return kPresetIds[static_cast<std::size_t>(p)]; }

Preset parse_preset(std::string_view id) {
  for (std::size_t i = 0; i < kNumPresets; ++i)
    if (kPresetIds[i] == id) return static_cast<Preset>(i);
  throw ConfigError("unknown expression preset '" + std::string(id) + "'");
}

std::vector<Preset> all_presets() {
  std::vector<Preset> v;
  for (std::size_t i = 0; i < kNumPresets; ++i) v.push_back(static_cast<Preset>(i));
  return v;
}

face::BlendshapeVector preset_pattern(Preset p) {
  face::BlendshapeVector v{};
  switch (p) {
    case Preset::kOpenMouth: v = au_jaw(); break;
    case Preset::kOMouth: v = au_pucker(); break;
    case Preset::kOpenEyes: v = au_wide(); break;
    case Preset::kCloseEyes: v = add(au_close_l(), au_close_r()); break;
    case Preset::kCloseLeftEye: v = au_close_l(); break;
    case Preset::kCloseRightEye: v = au_close_r(); break;
    case Preset::kSmile: v = au_smile(); break;
    case Preset::kSneerLeft: v = au_sneer_l(); break;
    case Preset::kSneerRight: v = au_sneer_r(); break;
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double& x : v) x /= mean;
  return v;
}

face::BlendshapeVector blink_pattern() { return add(au_close_l(), au_close_r()); }

void Timing::validate() const {
  auto range = [](double lo, double hi, const char* what) {
    if (!(lo >= 0.0) || hi < lo) throw ConfigError(std::string("timing: invalid ") + what + " range");
  };
  range(ramp_min, ramp_max, "ramp");
  range(hold_min, hold_max, "hold");
  range(pause_min, pause_max, "pause");
  if (ramp_min <= 0.0) throw ConfigError("timing: ramps must be positive");
  if (low_probability < 0.0 || low_probability > 1.0) throw ConfigError("timing: probability outside [0,1]");
  if (low_min < 50.0 || high_max > 200.0 || low_max < low_min || high_max < high_min)
    throw ConfigError("timing: peak degree must lie in [50, 200]");
}

Timing Timing::lab() { return Timing{}; }

Timing Timing::closed_loop() {
  Timing t;
  t.ramp_min = 0.1;
  t.ramp_max = 0.2;
  t.hold_min = 0.2;
  t.hold_max = 0.4;
  t.pause_min = 1.0;
  t.pause_max = 1.3;
  t.low_probability = 0.85;
  t.low_min = 50.0;
  return t;
}

void BlinkSpec::validate() const {
  if (!enabled) return;
  if (!(rate_min > 0.0) || rate_max < rate_min) throw ConfigError("blinks: invalid rate range");
  if (!(duration_min > 0.0) || duration_max < duration_min) throw ConfigError("blinks: invalid duration range");
  if (peak_min < 0.0 || peak_max > face::kScaledMax || peak_max < peak_min) throw ConfigError("blinks: invalid peak range");
  if (exact_count && *exact_count < 0) throw ConfigError("blinks: negative count");
}

void TrajectorySpec::validate() const {
  if (presets.empty()) throw ConfigError("trajectory: preset list is empty");
  if (repetitions < 0) throw ConfigError("trajectory: negative repetitions");
  if (!(frame_rate > 0.0)) throw ConfigError("trajectory: frame rate must be positive");
  if (duration_s < 0.0 || lead_in_s < 0.0) throw ConfigError("trajectory: negative duration");
  timing.validate();
  blinks.validate();
}

SynthResult synth_trajectory_ex(const TrajectorySpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const Timing& tm = spec.timing;

  struct Event {
    Preset preset;
    double start, ramp, hold, degree;
  };
  std::vector<Preset> order;
  for (int r = 0; r < spec.repetitions; ++r) order.insert(order.end(), spec.presets.begin(), spec.presets.end());
  if (spec.shuffle) shuffle(order, rng);

  std::vector<Event> events;
  double t = spec.lead_in_s;
  for (Preset p : order) {
    Event e{p, t, uniform(rng, tm.ramp_min, tm.ramp_max), uniform(rng, tm.hold_min, tm.hold_max), 0.0};
    const bool low = uniform(rng, 0.0, 1.0) < tm.low_probability;
    e.degree = low ? uniform(rng, tm.low_min, tm.low_max) : uniform(rng, tm.high_min, tm.high_max);
    const double pause = uniform(rng, tm.pause_min, tm.pause_max);
    events.push_back(e);
    t += 2.0 * e.ramp + e.hold + pause;
  }
  const double expr_end = t;
  const double duration = spec.duration_s > 0.0 ? spec.duration_s : expr_end;
  const auto n = static_cast<Eigen::Index>(std::floor(duration * spec.frame_rate));

  SynthResult out;
  out.expressions_end_s = expr_end;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(face::kNumBlendshapes));
  auto frame_time = [&](Eigen::Index k) { return (static_cast<double>(k) + 0.5) / spec.frame_rate; };
  auto frame_at = [&](double time) {
    return static_cast<Eigen::Index>(std::clamp(std::floor(time * spec.frame_rate - 0.5), 0.0, static_cast<double>(n)));
  };

  for (const auto& e : events) {
    const auto pattern = preset_pattern(e.preset);
    const double end = e.start + 2.0 * e.ramp + e.hold;
    for (Eigen::Index k = frame_at(e.start); k < n && frame_time(k) <= end + 1.0 / spec.frame_rate; ++k) {
      const double x = frame_time(k) - e.start;
      double a = 0.0;
      if (x <= 0.0) a = 0.0;
      else if (x < e.ramp) a = x / e.ramp;
      else if (x <= e.ramp + e.hold) a = 1.0;
      else a = std::max(0.0, 1.0 - (x - e.ramp - e.hold) / e.ramp);
      if (a == 0.0) continue;
      for (std::size_t c = 0; c < face::kNumBlendshapes; ++c) b(k, c) += a * e.degree * pattern[c];
    }
  }

  if (spec.blinks.enabled && spec.repetitions > 0) {
    const BlinkSpec& bs = spec.blinks;
    std::vector<double> onsets;
    const double usable_end = duration - 1.0;
    if (bs.exact_count) {
      const int count = *bs.exact_count;
      const double lo = spec.lead_in_s;
      const double slot = count > 0 ? (usable_end - lo) / count : 0.0;
      if (count > 0 && slot < 2.0 * bs.duration_max) throw ConfigError("blinks: too many blinks for the duration");
      for (int i = 0; i < count; ++i) {
        const double jitter = uniform(rng, 0.1, 0.9 - bs.duration_max / slot);
        onsets.push_back(lo + slot * (i + jitter));
      }
    } else {
      double tb = uniform(rng, 0.5, 3.0) + spec.lead_in_s;
      while (tb < usable_end) {
        onsets.push_back(tb);
        tb += 60.0 / uniform(rng, bs.rate_min, bs.rate_max);
      }
    }
    const auto pattern = blink_pattern();
    for (double onset : onsets) {
      BlinkTruth bt{onset, uniform(rng, bs.duration_min, bs.duration_max), uniform(rng, bs.peak_min, bs.peak_max)};
      out.blinks.push_back(bt);
      for (Eigen::Index k = frame_at(onset); k < n && frame_time(k) <= onset + bt.duration_s; ++k) {
        const double x = (frame_time(k) - onset) / bt.duration_s;
        if (x <= 0.0) continue;
        const double a = bt.peak * std::sin(std::numbers::pi * std::min(x, 1.0));
        for (std::size_t c = 0; c < face::kNumBlendshapes; ++c) b(k, c) += a * pattern[c];
      }
    }
  }
  out.trajectory.frames = b.cwiseMax(0.0).cwiseMin(face::kScaledMax);
  out.trajectory.frame_rate = spec.frame_rate;
  return out;
}

Trajectory synth_trajectory(const TrajectorySpec& spec) { return synth_trajectory_ex(spec).trajectory; }

Trajectory synth_trajectory(const std::vector<Preset>& presets, int repetitions, double frame_rate,
                            std::uint64_t seed) {
  TrajectorySpec spec;
  spec.presets = presets;
  spec.repetitions = repetitions;
  spec.frame_rate = frame_rate;
  spec.seed = seed;
  return synth_trajectory(spec);
}

Trajectory neutral_trajectory(std::size_t n_frames, double frame_rate) {
  Trajectory t;
  t.frames = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_frames), static_cast<Eigen::Index>(face::kNumBlendshapes));
  t.frame_rate = frame_rate;
  return t;
}

void interpolate_row(const Trajectory& t, double position, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
  const auto n = static_cast<Eigen::Index>(t.n_frames());
  if (n == 0) throw ShapeError("interpolate_row: empty trajectory");
  if (position <= 0.0) {
    out = t.frames.row(0);
    return;
  }
  if (position >= static_cast<double>(n - 1)) {
    out = t.frames.row(n - 1);
    return;
  }
  const auto k = static_cast<Eigen::Index>(std::floor(position));
  const double f = position - static_cast<double>(k);
  if (f == 0.0) {
    out = t.frames.row(k);
    return;
  }
  out = t.frames.row(k) + f * (t.frames.row(k + 1) - t.frames.row(k));
}

Trajectory resample(const Trajectory& t, double new_rate, std::optional<std::size_t> n_out) {
  if (!(new_rate > 0.0)) throw ConfigError("resample: rate must be positive");
  Trajectory r;
  r.frame_rate = new_rate;
  const std::size_t n = n_out.value_or(static_cast<std::size_t>(std::floor(t.duration() * new_rate)));
  r.frames.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(face::kNumBlendshapes));
  for (std::size_t j = 0; j < n; ++j) {
    const double time = (static_cast<double>(j) + 0.5) / new_rate;
    interpolate_row(t, time * t.frame_rate - 0.5, r.frames.row(static_cast<Eigen::Index>(j)));
  }
  return r;
}

// ---- JSON ----

namespace {
json timing_to_json(const Timing& t) {
  return {{"ramp", {t.ramp_min, t.ramp_max}},   {"hold", {t.hold_min, t.hold_max}},
          {"pause", {t.pause_min, t.pause_max}}, {"low_probability", t.low_probability},
          {"low", {t.low_min, t.low_max}},       {"high", {t.high_min, t.high_max}}};
}

Timing timing_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "lab") return Timing::lab();
    if (s == "closed-loop") return Timing::closed_loop();
    throw ConfigError("unknown timing profile '" + s + "'");
  }
  Timing t;
  auto pair = [&](const char* key, double& lo, double& hi) {
    if (j.contains(key)) {
      lo = j.at(key).at(0).get<double>();
      hi = j.at(key).at(1).get<double>();
    }
  };
  pair("ramp", t.ramp_min, t.ramp_max);
  pair("hold", t.hold_min, t.hold_max);
  pair("pause", t.pause_min, t.pause_max);
  pair("low", t.low_min, t.low_max);
  pair("high", t.high_min, t.high_max);
  t.low_probability = j.value("low_probability", t.low_probability);
  return t;
}
}  // namespace

void to_json(json& j, const TrajectorySpec& s) {
  std::vector<std::string> ids;
  for (auto p : s.presets) ids.emplace_back(preset_id(p));
  json blinks = {{"enabled", s.blinks.enabled},
                 {"rate_per_min", {s.blinks.rate_min, s.blinks.rate_max}},
                 {"duration_s", {s.blinks.duration_min, s.blinks.duration_max}},
                 {"peak", {s.blinks.peak_min, s.blinks.peak_max}},
                 {"exact_count", s.blinks.exact_count ? json(*s.blinks.exact_count) : json(nullptr)}};
  j = {{"presets", ids},       {"repetitions", s.repetitions}, {"frame_rate", s.frame_rate},
       {"duration_s", s.duration_s}, {"lead_in_s", s.lead_in_s},   {"shuffle", s.shuffle},
       {"timing", timing_to_json(s.timing)}, {"blinks", blinks},   {"seed", s.seed}};
}

void from_json(const json& j, TrajectorySpec& s) {
  s = TrajectorySpec{};
  if (j.contains("presets")) {
    s.presets.clear();
    for (const auto& id : j.at("presets")) s.presets.push_back(parse_preset(id.get<std::string>()));
  }
  s.repetitions = j.value("repetitions", s.repetitions);
  s.frame_rate = j.value("frame_rate", s.frame_rate);
  s.duration_s = j.value("duration_s", s.duration_s);
  s.lead_in_s = j.value("lead_in_s", s.lead_in_s);
  s.shuffle = j.value("shuffle", s.shuffle);
  if (j.contains("timing")) s.timing = timing_from_json(j.at("timing"));
  if (j.contains("blinks")) {
    const auto& b = j.at("blinks");
    s.blinks.enabled = b.value("enabled", true);
    auto pair = [&](const char* key, double& lo, double& hi) {
      if (b.contains(key)) {
        lo = b.at(key).at(0).get<double>();
        hi = b.at(key).at(1).get<double>();
      }
    };
    pair("rate_per_min", s.blinks.rate_min, s.blinks.rate_max);
    pair("duration_s", s.blinks.duration_min, s.blinks.duration_max);
    pair("peak", s.blinks.peak_min, s.blinks.peak_max);
    if (b.contains("exact_count") && !b.at("exact_count").is_null()) s.blinks.exact_count = b.at("exact_count").get<int>();
  }
  s.seed = j.value("seed", s.seed);
}

}  // namespace echoface::sim
