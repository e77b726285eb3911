#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <mutex>
#include <vector>

namespace ross {

using cplx = std::complex<double>;

/// Complex-baseband field sampled on a uniform time grid. Samples carry
/// units of sqrt(W) so |s|^2 is instantaneous power in watts.
struct SampledWaveform {
  std::vector<cplx> samples;
  double sample_rate = 0.0;    ///< Hz
  double center_offset = 0.0;  ///< grid center relative to the carrier, Hz

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

/// Sum |s|^2 * dt, joules.
double energy(const SampledWaveform& w);
/// Mean |s|^2, watts.
double mean_power(const SampledWaveform& w);

/// Frequency-domain view of a waveform. Bins are in ascending frequency
/// order, f_k = (k - N/2) * sample_rate / N, so bin 0 sits at -fs/2.
struct Spectrum {
  std::vector<cplx> bins;
  double sample_rate = 0.0;
  double center_offset = 0.0;

  std::size_t size() const { return bins.size(); }
  double bin_spacing() const {
    return sample_rate / static_cast<double>(bins.size());
  }
  /// Baseband frequency of bin k.
  double frequency(std::size_t k) const {
    return (static_cast<double>(k) -
            static_cast<double>(bins.size()) / 2.0) *
           bin_spacing();
  }
};

/// Linear time-invariant element described by its complex transfer function
/// H(f). Carries enough metadata for grid-coverage checks and loop stability
/// margins: center frequency, 3-dB bandwidth and an upper bound on |H|.
class FrequencyResponse {
 public:
  FrequencyResponse() = default;
  FrequencyResponse(std::function<cplx(double)> eval, double center_hz,
                    double bandwidth_3db_hz, double sup_gain)
      : eval_(std::move(eval)),
        center_hz_(center_hz),
        bandwidth_3db_hz_(bandwidth_3db_hz),
        sup_gain_(sup_gain) {}

  cplx operator()(double f_hz) const {
    return eval_ ? eval_(f_hz) : cplx{1.0, 0.0};
  }

  double center_hz() const { return center_hz_; }
  double bandwidth_3db_hz() const { return bandwidth_3db_hz_; }
  /// Upper bound on sup_f |H(f)|; exact for the passive elements built here.
  double sup_gain() const { return sup_gain_; }

  bool is_identity() const { return !eval_; }

 private:
  std::function<cplx(double)> eval_;  // empty means identity
  double center_hz_ = 0.0;
  double bandwidth_3db_hz_ = std::numeric_limits<double>::infinity();
  double sup_gain_ = 1.0;
};

/// Pointwise product H = lhs * rhs. The 3-dB bandwidth metadata of the
/// product is the narrower of the two; the center follows the narrower
/// member. sup bounds multiply.
FrequencyResponse operator*(const FrequencyResponse& lhs,
                            const FrequencyResponse& rhs);

/// H(f) = g for all f.
FrequencyResponse constant_response(cplx g);
/// Pure delay by tau seconds: H(f) = exp(-i 2 pi f tau).
FrequencyResponse delay_response(double tau_s);
/// H(f) scaled by a fixed complex gain.
FrequencyResponse scaled(const FrequencyResponse& h, cplx gain);

/// Unitary DFT: Parseval holds without scale factors. Length must be a
/// power of two; throws std::invalid_argument otherwise.
Spectrum forward_spectrum(const SampledWaveform& w);
/// Inverse of forward_spectrum; round trip is exact to ~1e-16 per sample.
SampledWaveform inverse_spectrum(const Spectrum& s);

/// Filters the waveform with H: multiplies bin k by H(f_k + center_offset).
/// Throws std::domain_error if H is non-finite at any grid frequency.
SampledWaveform apply_response(const SampledWaveform& w,
                               const FrequencyResponse& h);

/// One-sided occupancy: the smallest B such that the centered band
/// [-B, +B] holds at least energy_fraction of the waveform energy.
double occupied_bandwidth_hz(const SampledWaveform& w,
                             double energy_fraction = 0.999);

/// FFTW's planner is not thread-safe: every fftw_plan_* / fftw_destroy_plan
/// call in the process must hold this lock. Plan execution needs no lock.
std::mutex& fftw_planner_lock();

}  // namespace ross
