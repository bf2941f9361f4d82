#include "echoface/model/dataset.hpp"

#include <cstring>
#include <fstream>

#include "echoface/common/error.hpp"

namespace echoface::model {

WindowMap SessionData::window(std::size_t i) const {
  if (i >= n_windows()) throw ShapeError("window index out of range");
  const std::size_t first_col = i + 1;
  return {columns.data() + first_col * columns.rows(), columns.rows(), static_cast<Eigen::Index>(shape.n_frames),
          Eigen::OuterStride<>(columns.rows())};
}

void SessionData::validate() const {
  if (static_cast<std::size_t>(columns.rows()) != shape.rows()) throw ShapeError("session columns do not match the window shape");
  if (gt.rows() != columns.cols() || gt.cols() != static_cast<Eigen::Index>(face::kNumBlendshapes))
    throw ShapeError("session ground truth must be n_frames x 52");
  if (!frame_valid.empty() && frame_valid.size() != n_frames()) throw ShapeError("frame validity length mismatch");
}

SessionData assemble_dataset(const wire::AlignedSession& session, const fmcw::PipelineConfig& config,
                             std::string session_id, std::string participant) {
  if (session.n_frames() < config.window.n_frames + 1) {
    throw DataError("session '" + session_id + "' is too short: " + std::to_string(session.n_frames()) +
                    " frames, need at least " + std::to_string(config.window.n_frames + 1));
  }
  auto processed = fmcw::process_recording(session.signal, config, session.frame_valid);
  SessionData s;
  s.session_id = std::move(session_id);
  s.participant = participant.empty() ? s.session_id : std::move(participant);
  s.shape = config.window;
  s.frame_rate = processed.frame_rate;
  const auto frames = static_cast<Eigen::Index>(std::min<std::size_t>(processed.n_frames(), session.n_frames()));
  s.columns = processed.columns.leftCols(frames);
  s.gt = session.gt.topRows(frames);
  s.frame_valid.assign(processed.frame_valid.begin(), processed.frame_valid.begin() + frames);
  return s;
}

std::vector<DatasetWindow> materialize(const SessionData& s, std::size_t first, std::size_t count) {
  std::vector<DatasetWindow> out;
  const std::size_t end = std::min(s.n_windows(), count == static_cast<std::size_t>(-1) ? s.n_windows() : first + count);
  for (std::size_t i = first; i < end; ++i) {
    DatasetWindow w;
    w.input.values = s.window(i);
    w.input.current_frame = static_cast<std::int64_t>(s.frame_of(i));
    const Eigen::RowVectorXd t = s.target(i);
    for (std::size_t c = 0; c < face::kNumBlendshapes; ++c) w.target[c] = t[static_cast<Eigen::Index>(c)];
    w.session_id = s.session_id;
    w.frame_index = w.input.current_frame;
    out.push_back(std::move(w));
  }
  return out;
}

SessionData slice_frames(const SessionData& s, std::size_t begin, std::size_t count) {
  if (begin + count > s.n_frames()) throw ShapeError("slice_frames: range beyond the session");
  SessionData r;
  r.session_id = s.session_id;
  r.participant = s.participant;
  r.shape = s.shape;
  r.frame_rate = s.frame_rate;
  r.columns = s.columns.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
  if (count > 0) r.columns.col(0).setZero();  // its predecessor lies outside the slice
  r.gt = s.gt.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
  if (!s.frame_valid.empty())
    r.frame_valid.assign(s.frame_valid.begin() + static_cast<std::ptrdiff_t>(begin),
                         s.frame_valid.begin() + static_cast<std::ptrdiff_t>(begin + count));
  return r;
}

namespace {
constexpr char kMagic[4] = {'E', 'E', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("truncated session data file");
  return v;
}
void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_string(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  if (n > (1u << 20)) throw DataError("session data file: implausible string length");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw DataError("truncated session data file");
  return s;
}
}  // namespace

void save_session_data(const std::string& path, const SessionData& s) {
  s.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  os.write(kMagic, 4);
  put(os, kVersion);
  put_string(os, s.session_id);
  put_string(os, s.participant);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.shape.n_bins));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.shape.n_channels));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.shape.n_frames));
  put<double>(os, s.frame_rate);
  put<std::uint64_t>(os, s.n_frames());
  os.write(reinterpret_cast<const char*>(s.columns.data()), static_cast<std::streamsize>(s.columns.size() * sizeof(double)));
  std::vector<std::uint8_t> valid = s.frame_valid;
  if (valid.empty()) valid.assign(s.n_frames(), 1);
  os.write(reinterpret_cast<const char*>(valid.data()), static_cast<std::streamsize>(valid.size()));
  os.write(reinterpret_cast<const char*>(s.gt.data()), static_cast<std::streamsize>(s.gt.size() * sizeof(double)));
  if (!os) throw DataError("write failed: " + path);
}

SessionData load_session_data(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError(path + ": not a session data file");
  if (get<std::uint32_t>(is) != kVersion) throw DataError(path + ": unsupported session data version");
  SessionData s;
  s.session_id = get_string(is);
  s.participant = get_string(is);
  s.shape.n_bins = get<std::uint32_t>(is);
  s.shape.n_channels = get<std::uint32_t>(is);
  s.shape.n_frames = get<std::uint32_t>(is);
  s.frame_rate = get<double>(is);
  const auto frames = static_cast<Eigen::Index>(get<std::uint64_t>(is));
  s.columns.resize(static_cast<Eigen::Index>(s.shape.rows()), frames);
  if (!is.read(reinterpret_cast<char*>(s.columns.data()), static_cast<std::streamsize>(s.columns.size() * sizeof(double))))
    throw DataError("truncated session data file");
  s.frame_valid.resize(static_cast<std::size_t>(frames));
  if (!is.read(reinterpret_cast<char*>(s.frame_valid.data()), frames)) throw DataError("truncated session data file");
  s.gt.resize(frames, static_cast<Eigen::Index>(face::kNumBlendshapes));
  if (!is.read(reinterpret_cast<char*>(s.gt.data()), static_cast<std::streamsize>(s.gt.size() * sizeof(double))))
    throw DataError("truncated session data file");
  s.validate();
  return s;
}

}  // namespace echoface::model
