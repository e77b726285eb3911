#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ross/signal.hpp"

namespace ross {

/// Real-valued electrical trace (photocurrent, A).
struct ElectricalWaveform {
  std::vector<double> samples;
  double sample_rate = 0.0;
};

struct PdSpec {
  double responsivity_a_w = 0.8;
  double bandwidth_hz = 35e9;  ///< 2nd-order Butterworth
  double thermal_noise_a_sqrt_hz = 10e-12;
  bool shot_noise = true;
  bool thermal_noise = true;
  std::uint64_t seed = 1;
};

/// i(t) = R |E|^2 plus shot noise (variance 2 q R |E|^2 B_n per sample)
/// and thermal noise (density^2 B_n), both injected white over the Nyquist
/// band B_n = fs/2, then lowpassed by the PD Butterworth response.
ElectricalWaveform photodetect(const SampledWaveform& w, const PdSpec& pd);

/// One decision value per symbol per network output.
struct DecisionSamples {
  std::vector<std::vector<double>> outputs;  ///< [output][symbol]
  double baud = 0.0;

  std::size_t n_outputs() const { return outputs.size(); }
  std::size_t n_symbols() const {
    return outputs.empty() ? 0 : outputs.front().size();
  }
};

struct AdcSpec {
  int bits = 8;
  double rate_hz = 112e9;             ///< must not exceed the trace rate
  double analog_bandwidth_hz = 35e9;  ///< front-end Butterworth
  double sampling_phase = 0.0;        ///< fraction of a symbol, [0, 1)
  bool auto_phase = true;             ///< resolved by the experiment layer
};

/// Anti-alias filter, decimation to one sample per symbol at the given
/// phase, and uniform quantization to 2^bits levels. The full scale spans
/// mean +- 4 sigma of the first n_calibration_symbols decision samples
/// (0 = use all); values beyond it clip. bits > 16 or a trace shorter than
/// n_symbols * oversampling is rejected.
std::vector<double> adc_sample(const ElectricalWaveform& e,
                               const AdcSpec& adc, double baud,
                               std::size_t n_symbols, double sampling_phase,
                               std::size_t n_calibration_symbols = 0);

/// Applies adc_sample per output at a common phase.
DecisionSamples adc_sample_all(const std::vector<ElectricalWaveform>& es,
                               const AdcSpec& adc, double baud,
                               std::size_t n_symbols, double sampling_phase,
                               std::size_t n_calibration_symbols = 0);

/// Scans the oversampling-grid phases and returns the one minimizing the
/// caller's score (e.g. training error of a readout fit).
double resolve_sampling_phase(
    const std::vector<ElectricalWaveform>& es, const AdcSpec& adc,
    double baud, std::size_t n_symbols,
    const std::function<double(const DecisionSamples&)>& score,
    std::size_t n_calibration_symbols = 0);

}  // namespace ross
