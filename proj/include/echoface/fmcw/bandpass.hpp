#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include "echoface/fmcw/chirp.hpp"
#include "echoface/fmcw/waveform.hpp"

namespace echoface::fmcw {

struct BandpassSpec {
  int order = 5;
  double f_low_cut = 15500.0;
  double f_high_cut = 20500.0;
  double fs = 50000.0;

  void validate() const;

  /// Band edges placed `margin` Hz outside the chirp's sweep.
  static BandpassSpec for_chirp(const ChirpSpec& chirp, double margin = 500.0);
};

/// One second-order section, a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(double omega) const;
};

struct FilterCoefficients {
  std::vector<Biquad> sections;
  double fs = 0.0;
  /// Largest |z| over all poles; sets how fast transients decay.
  double max_pole_radius = 0.0;
  /// Digital frequency (Hz) at which the cascade has unit gain.
  double center_hz = 0.0;

  std::complex<double> response(double f_hz) const;
  double magnitude_db(double f_hz) const;
  /// Samples after which a unit transient has decayed below `tolerance`.
  std::size_t settling_samples(double tolerance = 1e-20) const;
};

/// Butterworth band-pass of 2*order poles: analog prototype, low-pass to
/// band-pass transform, then bilinear transform with both cutoffs pre-warped.
/// Realized as `order` second-order sections, each normalized to unit gain at
/// the warped geometric center.
FilterCoefficients design_bandpass(const BandpassSpec& spec);

/// Transposed direct form II cascade with caller-owned state.
class SosFilter {
 public:
  explicit SosFilter(const FilterCoefficients& coeffs);

  void reset();
  double step(double x);
  void process(std::span<const double> in, std::span<double> out);

 private:
  std::vector<Biquad> sections_;
  std::vector<std::array<double, 2>> state_;
};

/// Causal filtering from zero initial state; output length equals input length.
Waveform apply_filter(const FilterCoefficients& coeffs, const Waveform& x);

}  // namespace echoface::fmcw
