#include "echoface/sim/render.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "echoface/common/error.hpp"

namespace echoface::sim {

double unambiguous_range(const fmcw::ChirpSpec& chirp, double c) {
  return static_cast<double>(chirp.n_samples) * c / (2.0 * chirp.fs);
}

namespace {

// Linear interpolation straight between chirp samples is no delay at all near
// Nyquist: at 22 kHz (0.44 fs) its gain and phase swing across the band and
// pull the correlation peak a lag or two off. Interpolating instead on a
// band-limited (trigonometric) upsampling of the periodic chirp keeps the
// error at ~3e-4 of the amplitude for every band below fs/2.
constexpr std::size_t kOversample = 64;

struct ChirpTable {
  std::vector<double> source;
  std::vector<double> values;  // n * kOversample entries, values[j * kOversample] == source[j]

  std::size_t n() const { return source.size(); }

  /// s at position i0 - f (samples, 0 <= f < 1), periodic.
  double at(std::size_t i0, double f) const {
    const std::size_t len = values.size();
    const double q = f * static_cast<double>(kOversample);
    const auto qi = static_cast<std::size_t>(q);
    const double qf = q - static_cast<double>(qi);
    const std::size_t a = (i0 * kOversample + len - qi) % len;
    const std::size_t b = (a + len - 1) % len;
    return (1.0 - qf) * values[a] + qf * values[b];
  }
};

ChirpTable make_table(const std::vector<double>& s) {
  const std::size_t n = s.size();
  const std::size_t len = n * kOversample;
  ChirpTable t{s, std::vector<double>(len, 0.0)};
  // DFT of the periodic chirp, then the real trigonometric interpolant. The
  // Nyquist bin of an even period is split evenly between +n/2 and -n/2.
  const std::size_t half = n / 2;
  std::vector<std::complex<double>> X(half + 1);
  for (std::size_t k = 0; k <= half; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ph = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n);
      acc += s[i] * std::complex<double>(std::cos(ph), std::sin(ph));
    }
    X[k] = acc / static_cast<double>(n);
  }
  // cos/sin of 2 pi j / len; entry (k * j) % len gives harmonic k at point j.
  std::vector<double> c(len), sn(len);
  for (std::size_t j = 0; j < len; ++j) {
    c[j] = std::cos(2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(len));
    sn[j] = std::sin(2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(len));
  }
  for (std::size_t k = 0; k <= half; ++k) {
    const double weight = (k == 0 || (n % 2 == 0 && k == half)) ? 1.0 : 2.0;
    const double re = weight * X[k].real(), im = weight * X[k].imag();
    for (std::size_t j = 0, idx = 0; j < len; ++j) {
      t.values[j] += re * c[idx] - im * sn[idx];
      idx += k;
      if (idx >= len) idx -= len;
    }
  }
  for (std::size_t i = 0; i < n; ++i) t.values[i * kOversample] = s[i];
  return t;
}

// Tables are reused across calls with the same chirp.
const ChirpTable& table_for(const std::vector<double>& s) {
  thread_local ChirpTable cached;
  if (cached.source != s) cached = make_table(s);
  return cached;
}

// Adds refl * s(n - D) for a constant delay D (samples), periodic in n mod N.
void add_static_echo(std::vector<double>& out, const ChirpTable& s, double delay, double refl) {
  const std::size_t n_chirp = s.n();
  const double fl = std::floor(delay);
  const auto di = static_cast<std::size_t>(fl);
  const double f = delay - fl;
  for (std::size_t n = 0; n < out.size(); ++n) {
    const std::size_t m = n % n_chirp;
    const std::size_t i0 = (m + n_chirp - di % n_chirp) % n_chirp;
    out[n] += refl * s.at(i0, f);
  }
}

void check_distance(double d, double limit) {
  if (!(d >= 0.0) || d >= limit) {
    throw ConfigError("reflector distance " + std::to_string(d) + " m is outside the unambiguous range " +
                      std::to_string(limit) + " m");
  }
}

void render_moving(std::vector<std::vector<double>>& out, std::span<const Reflector> reflectors,
                   const Trajectory& traj, const ChirpTable& s, double fs, double gain_out,
                   bool inverse_square, double c) {
  const std::size_t n_chirp = s.n();
  const std::size_t frames = traj.n_frames();
  const double limit = static_cast<double>(n_chirp) * c / (2.0 * fs);
  std::vector<double> knots(frames);
  for (const auto& r : reflectors) {
    Eigen::Map<const Eigen::VectorXd> mix(r.mix.data(), static_cast<Eigen::Index>(r.mix.size()));
    bool moving = false;
    for (std::size_t k = 0; k < frames; ++k) {
      knots[k] = r.base_distance + r.gain * traj.frames.row(static_cast<Eigen::Index>(k)).dot(mix) / 1000.0;
      check_distance(knots[k], limit);
      moving = moving || knots[k] != knots[0];
    }
    auto& ch = out[static_cast<std::size_t>(r.channel)];
    if (!moving) {
      const double d = frames > 0 ? knots[0] : r.base_distance;
      const double att = inverse_square ? std::pow(0.1 / std::max(d, 1e-3), 2) : 1.0;
      add_static_echo(ch, s, 2.0 * d * fs / c, gain_out * r.reflectivity * att);
      continue;
    }
    for (std::size_t n = 0; n < ch.size(); ++n) {
      // Knot k sits at the centre of frame k.
      const double u = (static_cast<double>(n) + 0.5) / static_cast<double>(n_chirp) - 0.5;
      double d;
      if (u <= 0.0) {
        d = knots.front();
      } else if (u >= static_cast<double>(frames - 1)) {
        d = knots.back();
      } else {
        const auto k = static_cast<std::size_t>(u);
        const double fr = u - static_cast<double>(k);
        d = knots[k] + (knots[k + 1] - knots[k]) * fr;
      }
      const double delay = 2.0 * d * fs / c;
      const double fl = std::floor(delay);
      const auto di = static_cast<std::size_t>(fl);
      const double f = delay - fl;
      const std::size_t m = n % n_chirp;
      const std::size_t i0 = (m + n_chirp - di % n_chirp) % n_chirp;
      const double att = inverse_square ? std::pow(0.1 / std::max(d, 1e-3), 2) : 1.0;
      ch[n] += gain_out * r.reflectivity * att * s.at(i0, f);
    }
  }
}

}  // namespace

fmcw::Recording render_reflectors(std::span<const Reflector> reflectors, const Trajectory& traj,
                                  const fmcw::Waveform& chirp, double received_gain, bool inverse_square,
                                  double c) {
  traj.validate();
  chirp.validate();
  const double native = chirp.fs / static_cast<double>(chirp.size());
  if (std::abs(traj.frame_rate - native) > 1e-9 * native)
    throw ConfigError("render: trajectory must be at the chirp frame rate");
  auto rec = fmcw::make_recording(2, traj.n_frames() * chirp.size(), chirp.fs);
  render_moving(rec.channels, reflectors, traj, table_for(chirp.samples), chirp.fs, received_gain, inverse_square, c);
  return rec;
}

fmcw::Recording render_received(const Scene& scene, const Trajectory& traj, const fmcw::Waveform& chirp,
                                double c) {
  scene.validate();
  auto rec = render_reflectors(scene.reflectors, traj, chirp, scene.received_gain, scene.inverse_square, c);
  const double limit = static_cast<double>(chirp.size()) * c / (2.0 * chirp.fs);
  for (const auto& cl : scene.clutter) {
    check_distance(cl.distance, limit);
    const double att = scene.inverse_square ? std::pow(0.1 / cl.distance, 2) : 1.0;
    add_static_echo(rec.channels[static_cast<std::size_t>(cl.channel)], table_for(chirp.samples), 2.0 * cl.distance * chirp.fs / c,
                    scene.received_gain * cl.reflectivity * att);
  }
  return rec;
}

}  // namespace echoface::sim
