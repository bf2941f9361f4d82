#include "echoface/fmcw/correlator.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "echoface/common/error.hpp"

namespace echoface::fmcw {

namespace {

// The FFTW planner is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct Correlator::Impl {
  std::size_t n = 0;
  double* time = nullptr;
  fftw_complex* freq = nullptr;
  std::vector<std::complex<double>> tmpl_conj;  // conj(DFT(tmpl)) / n
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;

  explicit Impl(std::span<const double> tmpl) : n(tmpl.size()) {
    const std::size_t nf = n / 2 + 1;
    time = fftw_alloc_real(n);
    freq = fftw_alloc_complex(nf);
    {
      std::lock_guard lock(planner_mutex());
      forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), time, freq, FFTW_ESTIMATE);
      inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), freq, time, FFTW_ESTIMATE);
    }
    std::copy(tmpl.begin(), tmpl.end(), time);
    fftw_execute(forward);
    tmpl_conj.resize(nf);
    for (std::size_t k = 0; k < nf; ++k) {
      tmpl_conj[k] = std::conj(std::complex<double>(freq[k][0], freq[k][1])) / static_cast<double>(n);
    }
  }

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(inverse);
    fftw_free(time);
    fftw_free(freq);
  }
};

Correlator::Correlator(std::span<const double> tmpl) {
  if (tmpl.size() < 2) throw ShapeError("correlator template must hold >= 2 samples");
  impl_ = std::make_unique<Impl>(tmpl);
}
Correlator::~Correlator() = default;
Correlator::Correlator(Correlator&&) noexcept = default;
Correlator& Correlator::operator=(Correlator&&) noexcept = default;

std::size_t Correlator::size() const { return impl_->n; }

void Correlator::correlate(std::span<const double> frame, std::span<double> out) {
  Impl& m = *impl_;
  if (frame.size() != m.n || out.size() != m.n) {
    throw ShapeError("echo_profile: frame length " + std::to_string(frame.size()) +
                     " does not match template length " + std::to_string(m.n));
  }
  std::copy(frame.begin(), frame.end(), m.time);
  fftw_execute(m.forward);
  for (std::size_t k = 0; k < m.tmpl_conj.size(); ++k) {
    const std::complex<double> v = std::complex<double>(m.freq[k][0], m.freq[k][1]) * m.tmpl_conj[k];
    m.freq[k][0] = v.real();
    m.freq[k][1] = v.imag();
  }
  fftw_execute(m.inverse);
  std::copy(m.time, m.time + m.n, out.begin());
}

std::vector<double> Correlator::correlate(std::span<const double> frame) {
  std::vector<double> out(impl_->n);
  correlate(frame, out);
  return out;
}

struct EnvelopeDetector::Impl {
  std::size_t n = 0;
  fftw_complex* buf = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;

  explicit Impl(std::size_t len) : n(len) {
    buf = fftw_alloc_complex(n);
    std::lock_guard lock(planner_mutex());
    forward = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    inverse = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Impl() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(inverse);
    fftw_free(buf);
  }
};

EnvelopeDetector::EnvelopeDetector(std::size_t n) {
  if (n < 2) throw ShapeError("envelope length must be >= 2");
  impl_ = std::make_unique<Impl>(n);
}
EnvelopeDetector::~EnvelopeDetector() = default;

std::size_t EnvelopeDetector::size() const { return impl_->n; }

void EnvelopeDetector::envelope(std::span<const double> values, std::span<double> out) {
  Impl& m = *impl_;
  if (values.size() != m.n || out.size() != m.n) throw ShapeError("envelope: length mismatch");
  for (std::size_t i = 0; i < m.n; ++i) {
    m.buf[i][0] = values[i];
    m.buf[i][1] = 0.0;
  }
  fftw_execute(m.forward);
  // Analytic signal: keep DC (and Nyquist for even n), double positive bins, drop negative ones.
  const std::size_t half = m.n / 2;
  for (std::size_t k = 1; k < m.n; ++k) {
    double w = 0.0;
    if (k < (m.n + 1) / 2) {
      w = 2.0;
    } else if (m.n % 2 == 0 && k == half) {
      w = 1.0;
    }
    m.buf[k][0] *= w;
    m.buf[k][1] *= w;
  }
  fftw_execute(m.inverse);
  const double scale = 1.0 / static_cast<double>(m.n);
  for (std::size_t i = 0; i < m.n; ++i) {
    out[i] = std::hypot(m.buf[i][0], m.buf[i][1]) * scale;
  }
}

std::vector<double> EnvelopeDetector::envelope(std::span<const double> values) {
  std::vector<double> out(impl_->n);
  envelope(values, out);
  return out;
}

std::vector<double> echo_profile(std::span<const double> frame, std::span<const double> tmpl) {
  if (frame.size() != tmpl.size()) {
    throw ShapeError("echo_profile: frame length " + std::to_string(frame.size()) +
                     " does not match template length " + std::to_string(tmpl.size()));
  }
  Correlator c(tmpl);
  return c.correlate(frame);
}

std::size_t peak_lag(std::span<const double> profile) {
  EnvelopeDetector det(profile.size());
  const auto env = det.envelope(profile);
  return static_cast<std::size_t>(std::max_element(env.begin(), env.end()) - env.begin());
}

}  // namespace echoface::fmcw
