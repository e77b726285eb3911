#pragma once

#include <cstdint>

#include "ross/signal.hpp"

namespace ross {

/// Single-mode fiber span. Dispersion is stored in SI units (s/m^2);
/// use from_link_units to convert the usual ps/nm/km, dB/km, 1/(W km).
struct FiberSpec {
  double length_m = 0.0;
  double dispersion_s_m2 = 0.0;  ///< D
  double alpha_db_km = 0.0;      ///< power attenuation
  double gamma_w_m = 0.0;        ///< Kerr coefficient, 1/(W m)
  double lambda_m = 1550e-9;     ///< reference wavelength for beta2
  double max_step_m = 50.0;

  static FiberSpec from_link_units(double length_km, double d_ps_nm_km,
                                   double alpha_db_km, double gamma_w_km,
                                   double lambda_nm, double max_step_m = 50.0);

  /// beta2 = -D lambda^2 / (2 pi c), s^2/m.
  double beta2() const;
  /// Field attenuation rate, 1/m (power rate is twice this).
  double alpha_field_per_m() const;
};

/// Symmetric split-step Fourier integration of
///   dA/dz = -(alpha/2) A + i 2 pi^2 beta2 f^2 A (freq domain) + i gamma |A|^2 A.
/// Step = length / ceil(length / max_step). Requires the grid to cover at
/// least 4x the 99.9%-energy occupancy of the input (anti-aliasing margin
/// for nonlinear mixing products); throws std::invalid_argument otherwise.
/// Throws std::runtime_error with the step index if the field goes
/// non-finite.
SampledWaveform propagate(const SampledWaveform& w, const FiberSpec& spec);

/// Closed-form linear fiber transfer: exp(-alpha_field L) * exp(i 2 pi^2
/// beta2 L f^2). Oracle for the gamma = 0 limit of propagate.
FrequencyResponse fiber_linear_response(const FiberSpec& spec);

/// Flat-gain optical amplifier with ASE. The added noise is circular
/// complex Gaussian, per-sample variance (G - 1) * n_sp * h * nu * fs with
/// n_sp = 10^(NF_dB / 10) / 2, i.e. white ASE across the simulation band.
struct AmplifierSpec {
  double gain_db = 0.0;
  double noise_figure_db = 5.0;
  double center_frequency_hz = 193.41e12;  ///< optical carrier for h*nu
  bool noise_on = true;
};

SampledWaveform amplify(const SampledWaveform& w, const AmplifierSpec& spec,
                        std::uint64_t seed);

}  // namespace ross
