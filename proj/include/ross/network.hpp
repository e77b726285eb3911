#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "ross/filters.hpp"

namespace ross {

using FilterSpec = std::variant<MzdiSpec, MrrSpec>;

/// Output-port and chain-port responses of one filter slot. MRRs drop to
/// the output and pass the rest downstream on the through port; an MZDI
/// taps and recirculates the same filtered port (single-filter loops).
FrequencyResponse slot_output_response(const FilterSpec& f);
FrequencyResponse slot_chain_response(const FilterSpec& f);

/// One filter bank: input couples into a chain of filters whose through
/// path closes a shared feedback loop (delay loop_delay_s, amplitude
/// feedback_amplitude, phase loop_phase_rad). Consecutive filters are
/// joined by short waveguides with field transmission link_transmission,
/// delay link_delay_s, and optional per-link phase (fabrication jitter).
struct BankSpec {
  std::vector<FilterSpec> filters;
  double link_delay_s = 0.0;
  double link_transmission = 1.0;
  std::vector<double> link_phase_rad;  ///< size filters.size()-1 or empty
  double input_coupling = 0.5;         ///< a
  double output_coupling = 0.5;        ///< b
  double feedback_amplitude = 0.5;     ///< L_fb
  double loop_delay_s = 0.0;           ///< T_d
  double loop_phase_rad = 0.0;         ///< phi
};

struct NetworkTopology {
  std::vector<BankSpec> banks;
  bool per_filter_loops = false;

  std::size_t output_count() const {
    std::size_t n = 0;
    for (const auto& b : banks) n += b.filters.size();
    return n;
  }
};

enum class FilterKind { mzdi, mrr };

/// Declarative description expanded by build_topology. Filter j of bank k
/// sits at center = bank_center_k + j * filter_spacing; bank centers start
/// at center_hz + bank_offset and step by bank_spacing. With
/// auto_span, the N_B*N_F filter centers are placed uniformly across
/// [center - span/2, center + span/2] instead.
struct TopologyTemplate {
  int n_banks = 1;
  int n_filters = 1;
  FilterKind kind = FilterKind::mzdi;
  double bandwidth_hz = 50e9;    ///< per-filter 3-dB bandwidth (MZDI) or
                                 ///< MRR linewidth target via coupling
  double mrr_coupling = 0.0;     ///< if > 0, overrides bandwidth for MRRs
  double mrr_radius_m = 55e-6;
  double mrr_loss_db_cm = 0.4;
  double n_eff = 2.6;
  double center_hz = 0.0;
  double bank_spacing_hz = 0.0;
  double filter_spacing_hz = 0.0;
  std::vector<double> bank_offsets_hz;  ///< explicit bank centers
                                        ///< (relative to center_hz);
                                        ///< overrides bank_spacing_hz
  bool auto_span = false;
  double span_hz = 0.0;          ///< signal bandwidth for auto_span
  double link_delay_s = 0.0;
  double link_transmission = 1.0;
  double input_coupling = 0.5;
  double output_coupling = 0.5;
  double feedback_amplitude = 0.5;
  double loop_delay_s = 0.0;
  double loop_phase_rad = 0.0;
  bool per_filter_loops = false;
};

NetworkTopology build_topology(const TopologyTemplate& t);

/// Per-output transfer functions. Output j of bank k is
///   (1/sqrt(N_B)) * sqrt(1-a) sqrt(1-b)
///   * [prod_{i<j} chain_i * link_i] * drop_j
///   / (1 + sqrt(a b) L_fb * C(f) * e^{-i(2 pi f T_d + phi)}),
/// with C the full intra-bank chain cascade including links. Throws
/// std::invalid_argument when a loop violates the stability margin.
std::vector<FrequencyResponse> network_responses(const NetworkTopology& t);

/// Applies every output response to the waveform. The grid must cover each
/// filter's center frequency.
std::vector<SampledWaveform> process(const SampledWaveform& w,
                                     const NetworkTopology& t);

/// Fabrication jitter: filter centers and link transmissions scaled by
/// (1 + u), u ~ U(-r, +r); each link phase kicked by the carrier phase of
/// an n_eff deviation ~ N(0, n_eff_std) over the link length.
struct PerturbationSpec {
  double relative_jitter = 0.1;
  double n_eff_std = 0.15;
  double carrier_hz = 193.41e12;  ///< for the n_eff -> phase conversion
  std::uint64_t seed = 1;
};

struct PerturbedTopology {
  NetworkTopology topology;
  int resamples = 0;  ///< unstable draws rejected before this instance
};

PerturbedTopology perturb_topology(const NetworkTopology& t,
                                   const PerturbationSpec& p);

}  // namespace ross
