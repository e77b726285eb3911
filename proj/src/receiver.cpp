#include "ross/receiver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ross/filters.hpp"
#include "ross/rng.hpp"

namespace ross {

namespace {
constexpr double kElectronCharge = 1.602176634e-19;

// Filter a real trace through a frequency response by round trip through
// the complex FFT layer; the response must be Hermitian for a real result.
void filter_real(std::vector<double>& x, double fs,
                 const FrequencyResponse& h) {
  SampledWaveform w;
  w.sample_rate = fs;
  w.samples.reserve(x.size());
  for (double v : x) w.samples.push_back({v, 0.0});
  w = apply_response(w, h);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = w.samples[i].real();
}
}  // namespace

ElectricalWaveform photodetect(const SampledWaveform& w, const PdSpec& pd) {
  if (pd.responsivity_a_w <= 0.0 || pd.bandwidth_hz <= 0.0) {
    throw std::invalid_argument("responsivity and bandwidth must be positive");
  }
  const double fs = w.sample_rate;
  const double bn = fs / 2.0;  // Nyquist injection bandwidth
  ElectricalWaveform e;
  e.sample_rate = fs;
  e.samples.resize(w.samples.size());
  Rng rng(pd.seed);
  const double thermal_sigma =
      pd.thermal_noise ? pd.thermal_noise_a_sqrt_hz *
                             std::sqrt(bn)
                       : 0.0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    double p = std::norm(w.samples[i]);
    double cur = pd.responsivity_a_w * p;
    if (pd.shot_noise) {
      double var = 2.0 * kElectronCharge * pd.responsivity_a_w * p * bn;
      cur += std::sqrt(std::max(var, 0.0)) * rng.normal();
    }
    if (thermal_sigma > 0.0) cur += thermal_sigma * rng.normal();
    e.samples[i] = cur;
  }
  filter_real(e.samples, fs, butterworth_response({2, pd.bandwidth_hz, 0.0}));
  return e;
}

std::vector<double> adc_sample(const ElectricalWaveform& e,
                               const AdcSpec& adc, double baud,
                               std::size_t n_symbols, double sampling_phase,
                               std::size_t n_calibration_symbols) {
  if (adc.bits < 1 || adc.bits > 16) {
    throw std::invalid_argument("adc bits must lie in [1, 16]");
  }
  if (adc.rate_hz > e.sample_rate) {
    throw std::invalid_argument("adc rate exceeds the trace sample rate");
  }
  if (sampling_phase < 0.0 || sampling_phase >= 1.0) {
    throw std::invalid_argument("sampling phase must lie in [0, 1)");
  }
  const double sps = e.sample_rate / baud;
  if (static_cast<double>(e.samples.size()) <
      static_cast<double>(n_symbols) * sps) {
    throw std::invalid_argument(
        "trace holds " +
        std::to_string(static_cast<double>(e.samples.size()) / sps) +
        " symbols, need " + std::to_string(n_symbols));
  }

  std::vector<double> x;
  x.reserve(n_symbols);
  {
    std::vector<double> filtered = e.samples;
    filter_real(filtered, e.sample_rate,
                butterworth_response({2, adc.analog_bandwidth_hz, 0.0}));
    for (std::size_t s = 0; s < n_symbols; ++s) {
      double t = (static_cast<double>(s) + sampling_phase) * sps;
      std::size_t idx = static_cast<std::size_t>(std::llround(t));
      if (idx >= filtered.size()) idx = filtered.size() - 1;
      x.push_back(filtered[idx]);
    }
  }

  // full scale from the calibration (training) segment: mean +- 4 sigma
  std::size_t nc = n_calibration_symbols == 0
                       ? x.size()
                       : std::min(n_calibration_symbols, x.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < nc; ++i) mean += x[i];
  mean /= static_cast<double>(nc);
  double var = 0.0;
  for (std::size_t i = 0; i < nc; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= static_cast<double>(nc);
  double sigma = std::sqrt(var);
  double lo = mean - 4.0 * sigma;
  double hi = mean + 4.0 * sigma;
  if (!(hi > lo)) {  // constant input: degenerate full scale
    lo = mean - 1.0;
    hi = mean + 1.0;
  }
  const double levels = static_cast<double>((1u << adc.bits) - 1);
  const double step = (hi - lo) / levels;
  for (double& v : x) {
    double clipped = std::min(std::max(v, lo), hi);
    v = lo + std::round((clipped - lo) / step) * step;
  }
  return x;
}

DecisionSamples adc_sample_all(const std::vector<ElectricalWaveform>& es,
                               const AdcSpec& adc, double baud,
                               std::size_t n_symbols, double sampling_phase,
                               std::size_t n_calibration_symbols) {
  DecisionSamples ds;
  ds.baud = baud;
  for (const auto& e : es) {
    ds.outputs.push_back(adc_sample(e, adc, baud, n_symbols, sampling_phase,
                                    n_calibration_symbols));
  }
  return ds;
}

double resolve_sampling_phase(
    const std::vector<ElectricalWaveform>& es, const AdcSpec& adc,
    double baud, std::size_t n_symbols,
    const std::function<double(const DecisionSamples&)>& score,
    std::size_t n_calibration_symbols) {
  if (es.empty()) throw std::invalid_argument("no electrical traces");
  const int ov = static_cast<int>(std::lround(es.front().sample_rate / baud));
  if (ov < 1) throw std::invalid_argument("trace is below one sample/symbol");
  double best_phase = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < ov; ++j) {
    double phase = static_cast<double>(j) / ov;
    DecisionSamples ds = adc_sample_all(es, adc, baud, n_symbols, phase,
                                        n_calibration_symbols);
    double s = score(ds);
    if (s < best) {
      best = s;
      best_phase = phase;
    }
  }
  return best_phase;
}

}  // namespace ross
