#pragma once

#include <cstdint>
#include <vector>

#include "ross/signal.hpp"

namespace ross {

enum class ModFormat { pam4, qam16, qam32, analog };

/// Constellation points for a digital format, unit average power.
/// PAM4: 4 equispaced reals; QAM16: square; QAM32: cross (6x6 minus
/// corners).
const std::vector<cplx>& constellation(ModFormat format);
/// Bits per symbol (PAM4: 2, QAM16: 4, QAM32: 5).
int bits_per_symbol(ModFormat format);
/// Gray bit pattern of constellation point index (same order as
/// constellation()).
unsigned gray_bits(ModFormat format, std::size_t point_index);

struct SymbolStream {
  std::vector<cplx> symbols;
  ModFormat format = ModFormat::pam4;
  double baud = 0.0;
  std::uint64_t seed = 0;
};

/// I.i.d. uniform symbols over the constellation, deterministic under seed.
SymbolStream generate_symbols(ModFormat format, std::size_t n, double baud,
                              std::uint64_t seed);
/// Wraps real-valued drive values (e.g. a NARMA input sequence) as an
/// ANALOG stream.
SymbolStream analog_stream(const std::vector<double>& values, double baud);

/// Lang-Kobayashi rate-equation parameters. |E|^2 is the intracavity
/// photon number. t_ph is not listed in the source parameter table; 2 ps is
/// an assumed default.
struct LkParams {
  double gain_per_s = 1.2e4;          ///< g, differential gain
  double saturation = 5e-7;           ///< s, gain compression
  double spont_rate_per_s = 150.0;    ///< beta, spontaneous emission
  double carrier_lifetime_s = 2e-9;   ///< t_n
  double transparency_number = 1.5e8; ///< N0
  double alpha = 3.0;                 ///< linewidth enhancement
  double omega0_rad_s = 1.206e15;     ///< central oscillation frequency
  double bias_current_a = 0.035;      ///< I
  double photon_lifetime_s = 2e-12;   ///< t_ph (assumed)
  bool noise = true;
};

struct LaserSpec {
  enum class Mode { phase_noise_cw, lang_kobayashi };
  Mode mode = Mode::phase_noise_cw;
  double power_w = 1e-3;
  double linewidth_hz = 100e3;  ///< phase_noise_cw mode
  LkParams lk;
  std::uint64_t seed = 1;
};

/// CW mode: constant amplitude sqrt(power) with a Wiener phase whose
/// increments have variance 2 pi linewidth dt (Lorentzian line).
/// LK mode: Euler-Maruyama integration of the rate equations at dt <= 1 ps,
/// warmed up past the relaxation transient, mean power normalized to
/// spec.power_w. Throws std::runtime_error if the integration diverges.
SampledWaveform laser_field(const LaserSpec& spec, double duration_s,
                            double sample_rate_hz);

/// Raw LK integration trace (photon-number units), for rate-equation
/// diagnostics: field E, carrier number N.
struct LkTrace {
  std::vector<cplx> field;
  std::vector<double> carriers;
  double dt_s = 0.0;
};
LkTrace integrate_lang_kobayashi(const LkParams& p, double duration_s,
                                 double dt_s, std::uint64_t seed);

struct TxSpec {
  LaserSpec laser;
  int oversampling = 8;            ///< samples per symbol
  double mzm_bandwidth_hz = 35e9;  ///< 2nd-order Butterworth on the drive
  double extinction_ratio_db = 20.0;  ///< IM formats (PAM4, ANALOG)
  double cspr_db = 9.0;               ///< self-coherent formats (QAM)
  double analog_full_scale = 0.5;     ///< ANALOG drive mapping to [0, 1]
};

/// NRZ upsampling, MZM Butterworth filtering, and carrier multiplication.
/// IM formats map levels to equispaced powers with P_min/P_max =
/// 10^(-ER/10); QAM formats emit carrier + signal with
/// |c|^2 / mean|s|^2 = 10^(cspr/10), normalized after filtering. The
/// waveform length is symbols * oversampling (must suit the FFT layer:
/// powers of two in practice).
SampledWaveform modulate(const SymbolStream& stream, const TxSpec& tx);

}  // namespace ross
