#include "ross/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace ross {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void require_pow2(std::size_t n) {
  if (!is_pow2(n)) {
    throw std::invalid_argument("waveform length " + std::to_string(n) +
                                " is not a power of two");
  }
}

// One forward and one backward plan per transform size, created with
// FFTW_ESTIMATE (deterministic planning) and FFTW_UNALIGNED so they can be
// executed on any buffer via fftw_execute_dft. Plan creation is serialized;
// execution is thread-safe.
struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

PlanPair plans_for(std::size_t n) {
  static std::unordered_map<std::size_t, PlanPair> cache;
  std::lock_guard<std::mutex> lock(fftw_planner_lock());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cplx> a(n), b(n);
  auto* pa = reinterpret_cast<fftw_complex*>(a.data());
  auto* pb = reinterpret_cast<fftw_complex*>(b.data());
  PlanPair p;
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  p.fwd = fftw_plan_dft_1d(static_cast<int>(n), pa, pb, FFTW_FORWARD, flags);
  p.bwd = fftw_plan_dft_1d(static_cast<int>(n), pa, pb, FFTW_BACKWARD, flags);
  if (!p.fwd || !p.bwd) {
    throw std::runtime_error("fftw plan creation failed for length " +
                             std::to_string(n));
  }
  cache.emplace(n, p);
  return p;
}

void run_fft(const std::vector<cplx>& in, std::vector<cplx>& out, bool fwd) {
  PlanPair p = plans_for(in.size());
  out.resize(in.size());
  auto* pi =
      reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data()));
  auto* po = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(fwd ? p.fwd : p.bwd, pi, po);
}

}  // namespace

std::mutex& fftw_planner_lock() {
  static std::mutex mu;
  return mu;
}

double energy(const SampledWaveform& w) {
  double acc = 0.0;
  for (const cplx& s : w.samples) acc += std::norm(s);
  return w.sample_rate > 0 ? acc / w.sample_rate : 0.0;
}

double mean_power(const SampledWaveform& w) {
  if (w.samples.empty()) return 0.0;
  double acc = 0.0;
  for (const cplx& s : w.samples) acc += std::norm(s);
  return acc / static_cast<double>(w.samples.size());
}

FrequencyResponse operator*(const FrequencyResponse& lhs,
                            const FrequencyResponse& rhs) {
  if (lhs.is_identity()) return rhs;
  if (rhs.is_identity()) return lhs;
  const FrequencyResponse& narrow =
      rhs.bandwidth_3db_hz() < lhs.bandwidth_3db_hz() ? rhs : lhs;
  auto le = lhs;
  auto re = rhs;
  return FrequencyResponse(
      [le, re](double f) { return le(f) * re(f); }, narrow.center_hz(),
      narrow.bandwidth_3db_hz(), lhs.sup_gain() * rhs.sup_gain());
}

FrequencyResponse constant_response(cplx g) {
  return FrequencyResponse([g](double) { return g; }, 0.0,
                           std::numeric_limits<double>::infinity(),
                           std::abs(g));
}

FrequencyResponse delay_response(double tau_s) {
  return FrequencyResponse(
      [tau_s](double f) {
        double ph = -2.0 * M_PI * f * tau_s;
        return cplx{std::cos(ph), std::sin(ph)};
      },
      0.0, std::numeric_limits<double>::infinity(), 1.0);
}

FrequencyResponse scaled(const FrequencyResponse& h, cplx gain) {
  return h * constant_response(gain);
}

Spectrum forward_spectrum(const SampledWaveform& w) {
  require_pow2(w.samples.size());
  const std::size_t n = w.samples.size();
  std::vector<cplx> natural;
  run_fft(w.samples, natural, true);
  Spectrum s;
  s.sample_rate = w.sample_rate;
  s.center_offset = w.center_offset;
  s.bins.resize(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  // natural order k=0..N-1 maps to ascending order with -fs/2 first
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < n; ++k) {
    s.bins[k] = natural[(k + half) % n] * scale;
  }
  return s;
}

SampledWaveform inverse_spectrum(const Spectrum& s) {
  require_pow2(s.bins.size());
  const std::size_t n = s.bins.size();
  const std::size_t half = n / 2;
  std::vector<cplx> natural(n);
  for (std::size_t k = 0; k < n; ++k) {
    natural[(k + half) % n] = s.bins[k];
  }
  SampledWaveform w;
  w.sample_rate = s.sample_rate;
  w.center_offset = s.center_offset;
  run_fft(natural, w.samples, false);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (cplx& v : w.samples) v *= scale;
  return w;
}

SampledWaveform apply_response(const SampledWaveform& w,
                               const FrequencyResponse& h) {
  require_pow2(w.samples.size());
  if (h.is_identity()) return w;
  const std::size_t n = w.samples.size();
  const double df = w.sample_rate / static_cast<double>(n);
  std::vector<cplx> freq;
  run_fft(w.samples, freq, true);
  // natural bin order: k < N/2 holds f = k*df, the rest f = (k-N)*df
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < n; ++k) {
    double f = (k < half ? static_cast<double>(k)
                         : static_cast<double>(k) - static_cast<double>(n)) *
               df;
    cplx hv = h(f + w.center_offset);
    if (!std::isfinite(hv.real()) || !std::isfinite(hv.imag())) {
      throw std::domain_error("frequency response is non-finite at f = " +
                              std::to_string(f + w.center_offset) + " Hz");
    }
    freq[k] *= hv;
  }
  SampledWaveform out;
  out.sample_rate = w.sample_rate;
  out.center_offset = w.center_offset;
  run_fft(freq, out.samples, false);
  const double scale = 1.0 / static_cast<double>(n);
  for (cplx& v : out.samples) v *= scale;
  return out;
}

double occupied_bandwidth_hz(const SampledWaveform& w,
                             double energy_fraction) {
  Spectrum s = forward_spectrum(w);
  const std::size_t n = s.bins.size();
  double total = 0.0;
  for (const cplx& b : s.bins) total += std::norm(b);
  if (total <= 0.0) return 0.0;
  // expand a centered band bin by bin, nearest frequency first
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&s](std::size_t a, std::size_t b) {
    return std::abs(s.frequency(a)) < std::abs(s.frequency(b));
  });
  double acc = 0.0;
  for (std::size_t k : order) {
    acc += std::norm(s.bins[k]);
    if (acc >= energy_fraction * total) return std::abs(s.frequency(k));
  }
  return s.sample_rate / 2.0;
}

}  // namespace ross
