#pragma once

#include "ross/signal.hpp"

namespace ross {

/// Mach-Zehnder delay interferometer, one arm delayed by delay_s:
/// H(f) = (1 + exp(-i 2 pi (f - center) delay)) / 2.
/// 3-dB bandwidth of a passband lobe is 1 / (2 delay).
struct MzdiSpec {
  double center_hz = 0.0;  ///< passband peak, relative to carrier
  double delay_s = 0.0;    ///< arm imbalance, > 0
};

FrequencyResponse mzdi_response(const MzdiSpec& spec);

/// Converts a target 3-dB passband width to the MZDI arm delay.
inline double mzdi_delay_for_bandwidth(double bandwidth_hz) {
  return 1.0 / (2.0 * bandwidth_hz);
}

/// Add-drop microring resonator. Field transmission t1/t2 and coupling
/// k1/k2 at the two couplers satisfy t^2 + k^2 = 1 when lossless; the
/// round-trip factor is exp(Phi) with
/// Phi = -loss * L / 2 - i 2 pi (f - center) L n_eff / c.
struct MrrSpec {
  double t1 = 0.0, t2 = 0.0;  ///< through-coupler field transmissions
  double k1 = 0.0, k2 = 0.0;  ///< coupler field coupling coefficients
  double loss_per_m = 0.0;    ///< power loss coefficient, 1/m
  double circumference_m = 0.0;
  double n_eff = 2.6;
  double center_hz = 0.0;  ///< resonance offset from the carrier

  /// Symmetric ring from geometry: circumference 2 pi r, k1 = k2 = coupling,
  /// t = sqrt(1 - k^2), loss converted from dB/cm.
  static MrrSpec from_geometry(double radius_m, double loss_db_per_cm,
                               double coupling, double n_eff,
                               double center_hz);

  double fsr_hz() const;
  /// FWHM of one resonance at the drop port.
  double linewidth_hz() const;
};

enum class MrrPort { through, drop };

/// Through: (t1 - t2 e^Phi) / (1 - t1 t2 e^Phi).
/// Drop:    -k1 k2 e^Phi / (1 - t1 t2 e^Phi).
/// Lossless rings satisfy |H_through|^2 + |H_drop|^2 = 1 at every frequency.
FrequencyResponse mrr_response(const MrrSpec& spec, MrrPort port);

/// Butterworth low-pass prototype evaluated on the imaginary axis, shifted
/// to center_hz. |H(center +- cutoff)|^2 = 1/2 by construction.
struct ButterworthSpec {
  int order = 2;
  double cutoff_hz = 0.0;  ///< one-sided 3-dB frequency
  double center_hz = 0.0;
};

FrequencyResponse butterworth_response(const ButterworthSpec& spec);

/// Filter-in-a-loop node: a filter H closed through a delayed, attenuated
/// feedback path. Input/output couplers a and b, feedback field amplitude
/// L_fb, loop delay T_d and static loop phase phi give
///
///   H_node(f) = sqrt(1-a) sqrt(1-b) H(f)
///               / (1 + sqrt(a b) L_fb H(f) e^{-i(2 pi f T_d + phi)}).
///
/// The loop is stable iff sqrt(a b) * L_fb * sup|H| < 1; construction
/// rejects configurations that violate this. Passivity: sup|H_node| <= 1
/// whenever sup|H| <= 1.
struct RecurrentNodeSpec {
  FrequencyResponse inner;         ///< in-loop filter
  double input_coupling = 0.5;     ///< a, fraction of input power tapped into the loop
  double output_coupling = 0.5;    ///< b
  double feedback_amplitude = 0.5; ///< L_fb in [0, 1]
  double loop_delay_s = 0.0;       ///< T_d
  double loop_phase_rad = 0.0;     ///< phi
};

FrequencyResponse node_response(const RecurrentNodeSpec& spec);

/// Loop gain sqrt(a b) * L_fb * sup|H|; must stay below 1.
double node_loop_gain(const RecurrentNodeSpec& spec);

/// Time-domain impulse response of the node on a fresh grid: a unit sample
/// at t = 0 filtered by node_response. Grid length is the smallest power of
/// two covering duration_s.
SampledWaveform node_impulse_response(const RecurrentNodeSpec& spec,
                                      double duration_s,
                                      double sample_rate_hz);

}  // namespace ross
