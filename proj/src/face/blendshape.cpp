#include "echoface/face/blendshape.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "echoface/common/error.hpp"

namespace echoface::face {

namespace {
constexpr std::array<std::size_t, kNumBlendshapes> kAllIndices = [] {
  std::array<std::size_t, kNumBlendshapes> a{};
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = i;
  return a;
}();

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto p = line.find(sep, start);
    if (p == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, p - start));
    start = p + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

double parse_double(std::string_view s, std::size_t line_no) {
  s = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("blendshape CSV line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}
}  // namespace

std::span<const std::size_t> part_indices(Part part) {
  switch (part) {
    case Part::kLower:
      return kLowerIndices;
    case Part::kUpper:
      return kUpperIndices;
    case Part::kAll:
      break;
  }
  return kAllIndices;
}

std::optional<std::size_t> index_of(std::string_view name) {
  const auto it = std::find(kBlendshapeNames.begin(), kBlendshapeNames.end(), name);
  if (it == kBlendshapeNames.end()) return std::nullopt;
  return static_cast<std::size_t>(it - kBlendshapeNames.begin());
}

std::size_t require_index(std::string_view name) {
  const auto i = index_of(name);
  if (!i) throw ConfigError("unknown blendshape '" + std::string(name) + "'");
  return *i;
}

double clamp_scaled(double v, ClampCounter* counter) {
  if (v < 0.0 || v > kScaledMax || std::isnan(v)) {
    if (counter != nullptr) ++counter->clamped;
    if (std::isnan(v)) return 0.0;
    return std::clamp(v, 0.0, kScaledMax);
  }
  return v;
}

BlendshapeVector scale_arkit(std::span<const double> raw, ClampCounter* counter) {
  if (raw.size() != kNumBlendshapes) {
    throw ShapeError("scale_arkit: expected 52 values, got " + std::to_string(raw.size()));
  }
  BlendshapeVector out{};
  for (std::size_t i = 0; i < kNumBlendshapes; ++i) out[i] = clamp_scaled(raw[i] * kScaledMax, counter);
  return out;
}

void clamp_rows(Eigen::Ref<Eigen::MatrixXd> frames, ClampCounter* counter) {
  for (Eigen::Index j = 0; j < frames.cols(); ++j)
    for (Eigen::Index i = 0; i < frames.rows(); ++i) frames(i, j) = clamp_scaled(frames(i, j), counter);
}

BlendshapeTable make_table(const Eigen::MatrixXd& values, double frame_rate, double t0) {
  if (values.cols() != static_cast<Eigen::Index>(kNumBlendshapes)) throw ShapeError("make_table: need 52 columns");
  BlendshapeTable t;
  t.values = values;
  t.frame_index.resize(values.rows());
  t.timestamp_s.resize(values.rows());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    t.frame_index[i] = i;
    t.timestamp_s[i] = t0 + static_cast<double>(i) / frame_rate;
  }
  return t;
}

void write_blendshape_csv(std::ostream& os, const BlendshapeTable& table) {
  if (table.values.cols() != static_cast<Eigen::Index>(kNumBlendshapes)) throw ShapeError("blendshape table: need 52 columns");
  if (table.frame_index.size() != table.n_frames() || table.timestamp_s.size() != table.n_frames())
    throw ShapeError("blendshape table: index/timestamp length mismatch");
  os << "frame_index,timestamp_s";
  for (auto n : kBlendshapeNames) os << ',' << n;
  os << '\n';
  char buf[64];
  for (std::size_t r = 0; r < table.n_frames(); ++r) {
    os << table.frame_index[r];
    auto res = std::to_chars(buf, buf + sizeof buf, table.timestamp_s[r]);
    os << ',' << std::string_view(buf, res.ptr - buf);
    for (std::size_t c = 0; c < kNumBlendshapes; ++c) {
      res = std::to_chars(buf, buf + sizeof buf, table.values(r, c));
      os << ',' << std::string_view(buf, res.ptr - buf);
    }
    os << '\n';
  }
}

void write_blendshape_csv(const std::filesystem::path& path, const BlendshapeTable& table) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  write_blendshape_csv(os, table);
}

BlendshapeTable read_blendshape_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("blendshape CSV: empty input");
  const auto header = split(trim(line), ',');
  if (header.size() != kNumBlendshapes + 2 || trim(header[0]) != "frame_index" || trim(header[1]) != "timestamp_s")
    throw DataError("blendshape CSV: header must be frame_index,timestamp_s followed by 52 names");
  // Columns may be in any order; map by name.
  std::array<std::size_t, kNumBlendshapes> col_of{};
  std::array<bool, kNumBlendshapes> seen{};
  for (std::size_t c = 2; c < header.size(); ++c) {
    const auto idx = index_of(trim(header[c]));
    if (!idx || seen[*idx]) throw DataError("blendshape CSV: unknown or duplicate column '" + std::string(header[c]) + "'");
    seen[*idx] = true;
    col_of[*idx] = c;
  }
  std::vector<double> flat;
  BlendshapeTable t;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    const auto sv = trim(line);
    if (sv.empty()) continue;
    const auto f = split(sv, ',');
    if (f.size() != header.size()) throw DataError("blendshape CSV line " + std::to_string(line_no) + ": wrong field count");
    t.frame_index.push_back(static_cast<std::int64_t>(parse_double(f[0], line_no)));
    t.timestamp_s.push_back(parse_double(f[1], line_no));
    for (std::size_t k = 0; k < kNumBlendshapes; ++k) flat.push_back(parse_double(f[col_of[k]], line_no));
  }
  const auto rows = static_cast<Eigen::Index>(t.frame_index.size());
  t.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), rows, static_cast<Eigen::Index>(kNumBlendshapes));
  return t;
}

BlendshapeTable read_blendshape_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  return read_blendshape_csv(is);
}

}  // namespace echoface::face
