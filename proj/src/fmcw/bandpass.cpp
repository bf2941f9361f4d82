#include "echoface/fmcw/bandpass.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "echoface/common/error.hpp"

namespace echoface::fmcw {

using cplx = std::complex<double>;

void BandpassSpec::validate() const {
  if (order < 1) throw ConfigError("bandpass: order must be >= 1");
  if (!(fs > 0.0)) throw ConfigError("bandpass: fs must be positive");
  if (!(f_low_cut > 0.0)) throw ConfigError("bandpass: f_low_cut must be > 0");
  if (!(f_low_cut < f_high_cut)) throw ConfigError("bandpass: f_low_cut must be < f_high_cut");
  if (!(f_high_cut < fs / 2.0)) throw ConfigError("bandpass: f_high_cut must be < fs/2");
}

BandpassSpec BandpassSpec::for_chirp(const ChirpSpec& chirp, double margin) {
  return {5, chirp.f_lo - margin, chirp.f_hi + margin, chirp.fs};
}

cplx Biquad::response(double omega) const {
  const cplx z1 = std::polar(1.0, -omega);
  const cplx z2 = z1 * z1;
  return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
}

cplx FilterCoefficients::response(double f_hz) const {
  const double omega = 2.0 * std::numbers::pi * f_hz / fs;
  cplx h = 1.0;
  for (const auto& s : sections) h *= s.response(omega);
  return h;
}

double FilterCoefficients::magnitude_db(double f_hz) const {
  return 20.0 * std::log10(std::abs(response(f_hz)));
}

std::size_t FilterCoefficients::settling_samples(double tolerance) const {
  if (max_pole_radius <= 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(std::log(tolerance) / std::log(max_pole_radius)));
}

namespace {

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

}  // namespace

FilterCoefficients design_bandpass(const BandpassSpec& spec) {
  spec.validate();
  const double fs = spec.fs;
  const int n = spec.order;
  const double w1 = 2.0 * fs * std::tan(std::numbers::pi * spec.f_low_cut / fs);
  const double w2 = 2.0 * fs * std::tan(std::numbers::pi * spec.f_high_cut / fs);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  std::vector<cplx> upper;
  std::vector<cplx> real_poles;
  for (int k = 0; k < n; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n);
    const cplx proto = std::polar(1.0, theta);
    const cplx a = proto * bw / 2.0;
    const cplx disc = std::sqrt(a * a - w0 * w0);
    for (const cplx s : {a + disc, a - disc}) {
      const cplx z = bilinear(s, fs);
      if (std::abs(z.imag()) < 1e-12) {
        real_poles.push_back(cplx(z.real(), 0.0));
      } else if (z.imag() > 0.0) {
        upper.push_back(z);
      }
    }
  }
  std::sort(real_poles.begin(), real_poles.end(),
            [](cplx a, cplx b) { return a.real() < b.real(); });
  if (real_poles.size() % 2 != 0) throw ConfigError("bandpass: unpaired real pole");

  FilterCoefficients out;
  out.fs = fs;
  const double omega_c = 2.0 * std::atan(w0 / (2.0 * fs));
  out.center_hz = omega_c * fs / (2.0 * std::numbers::pi);

  auto add_section = [&](double a1, double a2) {
    Biquad bq{1.0, 0.0, -1.0, a1, a2};
    const double g = 1.0 / std::abs(bq.response(omega_c));
    bq.b0 *= g;
    bq.b2 *= g;
    out.sections.push_back(bq);
  };
  for (const cplx z : upper) {
    add_section(-2.0 * z.real(), std::norm(z));
    out.max_pole_radius = std::max(out.max_pole_radius, std::abs(z));
  }
  for (std::size_t i = 0; i < real_poles.size(); i += 2) {
    const double p = real_poles[i].real();
    const double q = real_poles[i + 1].real();
    add_section(-(p + q), p * q);
    out.max_pole_radius = std::max({out.max_pole_radius, std::abs(p), std::abs(q)});
  }
  if (out.sections.size() != static_cast<std::size_t>(n)) {
    throw ConfigError("bandpass: pole pairing produced an unexpected section count");
  }
  return out;
}

SosFilter::SosFilter(const FilterCoefficients& coeffs)
    : sections_(coeffs.sections), state_(coeffs.sections.size(), {0.0, 0.0}) {}

void SosFilter::reset() { std::fill(state_.begin(), state_.end(), std::array<double, 2>{0.0, 0.0}); }

double SosFilter::step(double x) {
  double v = x;
  for (std::size_t k = 0; k < sections_.size(); ++k) {
    const Biquad& s = sections_[k];
    auto& z = state_[k];
    const double y = s.b0 * v + z[0];
    z[0] = s.b1 * v - s.a1 * y + z[1];
    z[1] = s.b2 * v - s.a2 * y;
    v = y;
  }
  return v;
}

void SosFilter::process(std::span<const double> in, std::span<double> out) {
  if (in.size() != out.size()) throw ShapeError("SosFilter::process: size mismatch");
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = step(in[i]);
}

Waveform apply_filter(const FilterCoefficients& coeffs, const Waveform& x) {
  if (x.samples.empty()) throw DataError("apply_filter: empty input");
  SosFilter f(coeffs);
  Waveform y{std::vector<double>(x.samples.size()), x.fs};
  f.process(x.samples, y.samples);
  return y;
}

}  // namespace echoface::fmcw
