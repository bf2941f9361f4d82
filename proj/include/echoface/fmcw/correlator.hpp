#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace echoface::fmcw {

/// Circular cross-correlation of fixed-length frames against one template:
///   out[l] = sum_i frame[(i + l) mod n] * tmpl[i]
/// Lag l is the candidate round-trip delay in samples. Values are raw inner
/// products (no normalization).
class Correlator {
 public:
  explicit Correlator(std::span<const double> tmpl);
  ~Correlator();
  Correlator(const Correlator&) = delete;
  Correlator& operator=(const Correlator&) = delete;
  Correlator(Correlator&&) noexcept;
  Correlator& operator=(Correlator&&) noexcept;

  std::size_t size() const;
  void correlate(std::span<const double> frame, std::span<double> out);
  std::vector<double> correlate(std::span<const double> frame);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Magnitude of the analytic signal of a lag sequence, treated as periodic.
/// The peak of the envelope locates an echo without the carrier ripple that
/// makes the signed correlation's argmax ambiguous between neighbouring cycles.
class EnvelopeDetector {
 public:
  explicit EnvelopeDetector(std::size_t n);
  ~EnvelopeDetector();
  EnvelopeDetector(const EnvelopeDetector&) = delete;
  EnvelopeDetector& operator=(const EnvelopeDetector&) = delete;

  std::size_t size() const;
  void envelope(std::span<const double> values, std::span<double> out);
  std::vector<double> envelope(std::span<const double> values);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Single-channel echo profile of one frame.
std::vector<double> echo_profile(std::span<const double> frame, std::span<const double> tmpl);

/// Lag of the envelope maximum; first index wins on exact ties.
std::size_t peak_lag(std::span<const double> profile);

}  // namespace echoface::fmcw
