#include "echoface/model/model.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "echoface/common/error.hpp"

namespace echoface::model {

const char* model_kind_name(ModelKind k) { return k == ModelKind::kConv ? "conv" : "ridge"; }

ModelKind parse_model_kind(std::string_view s) {
  if (s == "ridge") return ModelKind::kRidge;
  if (s == "conv") return ModelKind::kConv;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (expected ridge or conv)");
}

std::vector<std::size_t> all_outputs() {
  std::vector<std::size_t> v(face::kNumBlendshapes);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

std::vector<std::size_t> blink_outputs() { return {face::kEyeBlinkL, face::kEyeBlinkR}; }

void ModelConfig::validate() const {
  if (kind == ModelKind::kConv) conv.validate();
  ridge.validate();
  if (outputs.empty()) throw ConfigError("model needs at least one output");
  std::vector<bool> seen(face::kNumBlendshapes, false);
  for (std::size_t o : outputs) {
    if (o >= face::kNumBlendshapes) throw ConfigError("output index out of range");
    if (seen[o]) throw ConfigError("duplicate output index");
    seen[o] = true;
  }
}

void Model::check_window_shape(std::size_t rows, std::size_t cols) const {
  if (rows != shape.rows() || cols != shape.n_frames)
    throw ShapeError("model expects " + std::to_string(shape.rows()) + "x" + std::to_string(shape.n_frames) +
                     " windows, got " + std::to_string(rows) + "x" + std::to_string(cols));
}

Eigen::MatrixXd Model::raw_outputs(const Eigen::MatrixXd& flat) const {
  if (static_cast<std::size_t>(flat.rows()) != shape.size()) throw ShapeError("flattened window has the wrong length");
  const auto frames = static_cast<Eigen::Index>(shape.n_frames);
  const Eigen::VectorXd mean = norm.mean.replicate(frames, 1);
  const Eigen::VectorXd inv = norm.scale.cwiseInverse().replicate(frames, 1);
  Eigen::MatrixXd xn = flat;
  xn.colwise() -= mean;
  xn.array().colwise() *= inv.array();
  if (config.kind == ModelKind::kRidge) {
    Eigen::MatrixXd out = xn.transpose() * ridge.w;
    out.rowwise() += ridge.bias;
    return out;
  }
  Eigen::MatrixXd out = conv.forward(xn).transpose() * target_scale;
  out.rowwise() += offset;
  return out;
}

namespace {
void finish(const Model& m, Eigen::MatrixXd& out) {
  if (m.config.target == TargetMode::kChange) out.rowwise() += m.rest;
  face::clamp_rows(out);
}
}  // namespace

Eigen::MatrixXd Model::predict_flat(const Eigen::MatrixXd& flat) const {
  Eigen::MatrixXd out = raw_outputs(flat);
  finish(*this, out);
  return out;
}

face::BlendshapeVector Model::predict(const fmcw::EchoWindow& w) const {
  check_window_shape(w.rows(), w.cols());
  const Eigen::Map<const Eigen::VectorXd> flat(w.values.data(), w.values.size());
  const Eigen::MatrixXd out = predict_flat(flat);
  face::BlendshapeVector v{};
  for (std::size_t j = 0; j < config.outputs.size(); ++j) v[config.outputs[j]] = out(0, static_cast<Eigen::Index>(j));
  return v;
}

Eigen::MatrixXd Model::predict_session(const SessionData& s) const {
  if (!(s.shape == shape)) throw ShapeError("session window shape differs from the model's");
  Eigen::MatrixXd out;
  if (config.kind == ModelKind::kRidge) {
    out = ridge_predict_session(ridge, norm, s);
  } else {
    const std::size_t m = s.n_windows();
    out.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n_outputs()));
    constexpr std::size_t kBatch = 256;
    const auto d = static_cast<Eigen::Index>(shape.size());
    Eigen::MatrixXd flat(d, static_cast<Eigen::Index>(kBatch));
    for (std::size_t i0 = 0; i0 < m; i0 += kBatch) {
      const std::size_t k = std::min(kBatch, m - i0);
      for (std::size_t j = 0; j < k; ++j) {
        const auto win = s.window(i0 + j);
        for (Eigen::Index c = 0; c < win.cols(); ++c)
          flat.col(static_cast<Eigen::Index>(j)).segment(c * win.rows(), win.rows()) = win.col(c);
      }
      out.middleRows(static_cast<Eigen::Index>(i0), static_cast<Eigen::Index>(k)) =
          raw_outputs(flat.leftCols(static_cast<Eigen::Index>(k)));
    }
  }
  finish(*this, out);
  return out;
}

Eigen::MatrixXd Model::expand(const Eigen::MatrixXd& outputs) const {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(outputs.rows(), static_cast<Eigen::Index>(face::kNumBlendshapes));
  for (std::size_t j = 0; j < config.outputs.size(); ++j)
    full.col(static_cast<Eigen::Index>(config.outputs[j])) = outputs.col(static_cast<Eigen::Index>(j));
  return full;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : c.conv.blocks) blocks.push_back({{"filters", b.filters}, {"stride", b.stride}});
  j = {{"kind", model_kind_name(c.kind)},
       {"target", target_mode_name(c.target)},
       {"outputs", c.outputs},
       {"ridge", {{"lambda", c.ridge.lambda}, {"relative_lambda", c.ridge.relative_lambda}, {"shifts", c.ridge.shifts}}},
       {"conv", {{"blocks", blocks}, {"dense", c.conv.dense}, {"split_channels", c.conv.split_channels}, {"position_channel", c.conv.position_channel}}}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  if (j.contains("kind")) c.kind = parse_model_kind(j.at("kind").get<std::string>());
  if (j.contains("target")) c.target = parse_target_mode(j.at("target").get<std::string>());
  if (j.contains("outputs")) c.outputs = j.at("outputs").get<std::vector<std::size_t>>();
  if (j.contains("ridge")) {
    const auto& r = j.at("ridge");
    c.ridge.lambda = r.value("lambda", c.ridge.lambda);
    c.ridge.relative_lambda = r.value("relative_lambda", c.ridge.relative_lambda);
    if (r.contains("shifts")) c.ridge.shifts = r.at("shifts").get<std::vector<int>>();
  }
  if (j.contains("conv")) {
    const auto& v = j.at("conv");
    if (v.contains("blocks")) {
      c.conv.blocks.clear();
      for (const auto& b : v.at("blocks")) c.conv.blocks.push_back({b.at("filters").get<int>(), b.at("stride").get<int>()});
    }
    if (v.contains("dense")) c.conv.dense = v.at("dense").get<std::vector<int>>();
    c.conv.split_channels = v.value("split_channels", false);
    c.conv.position_channel = v.value("position_channel", true);
  }
  c.validate();
}

namespace {

constexpr char kMagic[4] = {'E', 'F', 'M', 'D'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("truncated model file");
  return v;
}

void put_tensor(std::ostream& os, const std::string& name, const double* data, std::size_t n) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint64_t>(os, n);
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

template <typename M>
void put_tensor(std::ostream& os, const std::string& name, const M& m) {
  put_tensor(os, name, m.data(), static_cast<std::size_t>(m.size()));
}

}  // namespace

void save_model(const std::filesystem::path& path, const Model& m) {
  nlohmann::json meta = {{"config", m.config},
                         {"shape", {{"n_bins", m.shape.n_bins}, {"n_channels", m.shape.n_channels}, {"n_frames", m.shape.n_frames}}},
                         {"target_scale", m.target_scale},
                         {"effective_lambda", m.ridge.effective_lambda}};
  const std::string text = meta.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write model file " + path.string());
  os.write(kMagic, 4);
  put(os, kModelFormatVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint32_t>(os, m.config.kind == ModelKind::kRidge ? 6 : 5);
  put_tensor(os, "norm.mean", m.norm.mean);
  put_tensor(os, "norm.scale", m.norm.scale);
  put_tensor(os, "rest", m.rest);
  put_tensor(os, "offset", m.offset);
  if (m.config.kind == ModelKind::kRidge) {
    put_tensor(os, "ridge.w", m.ridge.w);
    put_tensor(os, "ridge.bias", m.ridge.bias);
  } else {
    put_tensor(os, "conv.params", m.conv.params().data(), m.conv.n_params());
  }
  if (!os) throw DataError("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open model file " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError(path.string() + ": not a model file");
  const auto version = get<std::uint32_t>(is);
  if (version != kModelFormatVersion)
    throw DataError(path.string() + ": model format version " + std::to_string(version) + " is not supported");
  const auto len = get<std::uint32_t>(is);
  if (len > (1u << 24)) throw DataError("model header too large");
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw DataError("truncated model file");

  Model m;
  try {
    const auto meta = nlohmann::json::parse(text);
    m.config = meta.at("config").get<ModelConfig>();
    const auto& sh = meta.at("shape");
    m.shape.n_bins = sh.at("n_bins").get<std::size_t>();
    m.shape.n_channels = sh.at("n_channels").get<std::size_t>();
    m.shape.n_frames = sh.at("n_frames").get<std::size_t>();
    m.target_scale = meta.at("target_scale").get<double>();
    m.ridge.effective_lambda = meta.value("effective_lambda", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt model header: " + std::string(e.what()));
  }

  std::map<std::string, std::vector<double>> tensors;
  const auto count = get<std::uint32_t>(is);
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto nlen = get<std::uint32_t>(is);
    if (nlen > 256) throw DataError("corrupt model tensor name");
    std::string name(nlen, '\0');
    if (!is.read(name.data(), nlen)) throw DataError("truncated model file");
    const auto n = get<std::uint64_t>(is);
    if (n > (std::uint64_t{1} << 32)) throw DataError("corrupt model tensor size");
    std::vector<double> v(n);
    if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
      throw DataError("truncated model file");
    tensors[name] = std::move(v);
  }
  auto take = [&](const std::string& name, std::size_t expect) -> std::vector<double>& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("model file lacks tensor " + name);
    if (it->second.size() != expect)
      throw DataError("model tensor " + name + " has " + std::to_string(it->second.size()) + " values, expected " +
                      std::to_string(expect));
    return it->second;
  };
  const auto rows = static_cast<Eigen::Index>(m.shape.rows());
  const auto q = static_cast<Eigen::Index>(m.n_outputs());
  m.norm.mean = Eigen::Map<const Eigen::VectorXd>(take("norm.mean", rows).data(), rows);
  m.norm.scale = Eigen::Map<const Eigen::VectorXd>(take("norm.scale", rows).data(), rows);
  m.rest = Eigen::Map<const Eigen::RowVectorXd>(take("rest", q).data(), q);
  m.offset = Eigen::Map<const Eigen::RowVectorXd>(take("offset", q).data(), q);
  if (m.config.kind == ModelKind::kRidge) {
    const auto d = static_cast<Eigen::Index>(m.shape.size());
    m.ridge.w = Eigen::Map<const Eigen::MatrixXd>(take("ridge.w", static_cast<std::size_t>(d * q)).data(), d, q);
    m.ridge.bias = Eigen::Map<const Eigen::RowVectorXd>(take("ridge.bias", q).data(), q);
  } else {
    m.conv = ConvNet(m.config.conv, m.shape, m.n_outputs(), 0);
    const auto& v = take("conv.params", m.conv.n_params());
    m.conv.params().assign(v.begin(), v.end());
  }
  return m;
}

}  // namespace echoface::model
