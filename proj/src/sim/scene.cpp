#include "echoface/sim/scene.hpp"

#include <cmath>
#include <fstream>


#include "echoface/common/error.hpp"
#include "echoface/fmcw/chirp.hpp"

namespace echoface::sim {

using nlohmann::json;

void NoiseSpec::validate() const {
  if (audible_band) {
    if (!(audible_band->f_max > 0.0) || audible_band->f_max > 15000.0)
      throw ConfigError("noise: audible band f_max must lie in (0, 15000] Hz");
    if (!std::isfinite(audible_band->snr_db)) throw ConfigError("noise: audible band level must be finite");
  }
  if (white_snr_db && std::isnan(*white_snr_db)) throw ConfigError("noise: white SNR is NaN");
}

void Scene::validate() const {
  bool has[2] = {false, false};
  bool any_face = false;
  for (const auto& r : reflectors) {
    if (r.channel != 0 && r.channel != 1) throw ConfigError("reflector channel must be 0 or 1");
    if (r.reflectivity < 0.0 || r.reflectivity > 1.0) throw ConfigError("reflectivity must lie in [0, 1]");
    if (r.face) {
      any_face = true;
      has[r.channel] = true;
      if (r.base_distance < kFaceMinDistance || r.base_distance > kFaceMaxDistance)
        throw ConfigError("face reflector base distance must lie in [0.005, 0.15] m");
    } else if (r.base_distance < 0.0) {
      throw ConfigError("reflector distance must be non-negative");
    }
  }
  if (any_face && !(has[0] && has[1])) throw ConfigError("face scenes need at least one reflector per channel");
  for (const auto& c : clutter) {
    if (c.channel != 0 && c.channel != 1) throw ConfigError("clutter channel must be 0 or 1");
    if (c.distance <= kClutterMinDistance) throw ConfigError("clutter must lie beyond 0.12 m");
    if (c.reflectivity < 0.0 || c.reflectivity > 1.0) throw ConfigError("reflectivity must lie in [0, 1]");
  }
  for (double t : clap_times)
    if (!(t >= 0.0)) throw ConfigError("clap times must be non-negative");
  if (!(received_gain > 0.0)) throw ConfigError("received gain must be positive");
  noise.validate();
}

face::BlendshapeVector mix_from_pairs(std::initializer_list<std::pair<const char*, double>> pairs) {
  face::BlendshapeVector v{};
  for (const auto& [name, w] : pairs) v[face::require_index(name)] = w;
  return v;
}

Scene default_scene() {
  Scene s;
  auto add = [&](int ch, double d, double refl, face::BlendshapeVector mix) {
    Reflector r;
    r.channel = ch;
    r.base_distance = d;
    r.reflectivity = refl;
    r.mix = mix;
    s.reflectors.push_back(r);
  };
  // Left side of the face on channel 0, right side on channel 1.
  add(0, 0.025, 0.6, mix_from_pairs({{"eyeBlink_L", .8}, {"eyeWide_L", -.6}, {"eyeSquint_L", .3}, {"browDown_L", .3}}));
  add(0, 0.045, 0.5,
      mix_from_pairs({{"cheekSquint_L", .8}, {"noseSneer_L", .7}, {"mouthSmile_L", .3}, {"browInnerUp", .5}}));
  add(0, 0.065, 0.4, mix_from_pairs({{"mouthSmile_L", .8}, {"mouthUpperUp_L", .5}, {"jawOpen", -.3}}));
  add(0, 0.085, 0.35, mix_from_pairs({{"jawOpen", .9}, {"mouthPucker", -.7}, {"mouthFunnel", -.3}}));
  add(1, 0.025, 0.6, mix_from_pairs({{"eyeBlink_R", .8}, {"eyeWide_R", -.6}, {"eyeSquint_R", .3}, {"browDown_R", .3}}));
  add(1, 0.045, 0.5,
      mix_from_pairs({{"cheekSquint_R", .8}, {"noseSneer_R", .7}, {"mouthSmile_R", .3}, {"browOuterUp_R", -.6}}));
  add(1, 0.065, 0.4, mix_from_pairs({{"mouthSmile_R", .8}, {"mouthUpperUp_R", .5}, {"jawOpen", -.3}}));
  add(1, 0.085, 0.35, mix_from_pairs({{"jawOpen", .9}, {"mouthPucker", .7}, {"mouthFunnel", .3}}));
  s.clutter = {{0, 0.7, 0.3}, {0, 1.3, 0.2}, {1, 0.9, 0.3}, {1, 1.2, 0.2}};
  s.clap_times = {0.6};
  return s;
}

Scene single_reflector_scene(double distance, int channel, double reflectivity) {
  Scene s;
  Reflector r;
  r.channel = channel;
  r.base_distance = distance;
  r.reflectivity = reflectivity;
  r.face = false;
  r.gain = 0.0;
  s.reflectors.push_back(r);
  return s;
}

Scene shifted_scene(const Scene& scene, double offset) {
  Scene s = scene;
  for (auto& r : s.reflectors)
    if (r.face) r.base_distance += offset;
  return s;
}

// ---- JSON ----

namespace {
json mix_to_json(const face::BlendshapeVector& mix) {
  json m = json::object();
  for (std::size_t i = 0; i < mix.size(); ++i)
    if (mix[i] != 0.0) m[std::string(face::kBlendshapeNames[i])] = mix[i];
  return m;
}

face::BlendshapeVector mix_from_json(const json& m) {
  face::BlendshapeVector v{};
  for (const auto& [k, w] : m.items()) v[face::require_index(k)] = w.get<double>();
  return v;
}
}  // namespace

void to_json(json& j, const Scene& s) {
  j = json::object();
  j["received_gain"] = s.received_gain;
  j["inverse_square"] = s.inverse_square;
  j["reflectors"] = json::array();
  for (const auto& r : s.reflectors) {
    j["reflectors"].push_back({{"channel", r.channel},
                               {"base_distance", r.base_distance},
                               {"reflectivity", r.reflectivity},
                               {"gain", r.gain},
                               {"face", r.face},
                               {"mix", mix_to_json(r.mix)}});
  }
  j["clutter"] = json::array();
  for (const auto& c : s.clutter)
    j["clutter"].push_back({{"channel", c.channel}, {"distance", c.distance}, {"reflectivity", c.reflectivity}});
  json noise = json::object();
  noise["white_snr_db"] = s.noise.white_snr_db ? json(*s.noise.white_snr_db) : json(nullptr);
  noise["audible_band"] = s.noise.audible_band
                              ? json{{"f_max", s.noise.audible_band->f_max}, {"snr_db", s.noise.audible_band->snr_db}}
                              : json(nullptr);
  j["noise"] = noise;
  j["clap_times"] = s.clap_times;
}

void from_json(const json& j, Scene& s) {
  s = Scene{};
  s.received_gain = j.value("received_gain", s.received_gain);
  s.inverse_square = j.value("inverse_square", false);
  for (const auto& r : j.value("reflectors", json::array())) {
    Reflector x;
    x.channel = r.at("channel").get<int>();
    x.base_distance = r.at("base_distance").get<double>();
    x.reflectivity = r.value("reflectivity", x.reflectivity);
    x.gain = r.value("gain", x.gain);
    x.face = r.value("face", true);
    if (r.contains("mix")) x.mix = mix_from_json(r.at("mix"));
    s.reflectors.push_back(x);
  }
  for (const auto& c : j.value("clutter", json::array()))
    s.clutter.push_back({c.at("channel").get<int>(), c.at("distance").get<double>(), c.value("reflectivity", 0.3)});
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    if (n.contains("white_snr_db") && !n.at("white_snr_db").is_null()) s.noise.white_snr_db = n.at("white_snr_db").get<double>();
    if (n.contains("audible_band") && !n.at("audible_band").is_null()) {
      const auto& a = n.at("audible_band");
      s.noise.audible_band = AudibleBand{a.value("f_max", 5000.0), a.value("snr_db", -10.0)};
    }
  }
  s.clap_times = j.value("clap_times", std::vector<double>{});
}

Scene load_scene(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open scene file " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError("scene file " + path + ": " + e.what());
  }
  Scene s = j.get<Scene>();
  s.validate();
  return s;
}

void save_scene(const std::string& path, const Scene& s) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << json(s).dump(2) << '\n';
}

}  // namespace echoface::sim
