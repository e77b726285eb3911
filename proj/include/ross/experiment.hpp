#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ross/network.hpp"
#include "ross/transmitter.hpp"

namespace ross {

using ordered_json = nlohmann::ordered_json;

enum class Task { narma, equalize, memcap, fading, scan };

std::string task_name(Task t);
Task parse_task(const std::string& name);

/// All config sections use unit-suffixed keys and reject unknown keys, so
/// sweep-path typos fail loudly instead of silently running defaults.
struct LaserConfig {
  std::string mode = "cw";  ///< "cw" or "lk"
  double power_dbm = 0.0;
  double linewidth_khz = 100.0;
  double wavelength_nm = 1550.0;
  bool lk_noise = true;

  double carrier_hz() const;
  double power_w() const;
};

struct ModulationConfig {
  std::string format = "pam4";  ///< pam4 | qam16 | qam32 | analog
  double baud_gbd = 112.0;
  int oversampling = 8;
  double mzm_bandwidth_ghz = 35.0;
  double extinction_ratio_db = 20.0;
  double cspr_db = 9.0;
  double analog_full_scale = 0.5;

  ModFormat format_enum() const;
};

struct SpanConfig {
  double length_km = 0.0;
  double dispersion_ps_nm_km = 17.0;
  double alpha_db_km = 0.2;
  double gamma_per_w_km = 1.3;
  double post_gain_db = 0.0;  ///< lumped amplifier after the span
  double max_step_m = 50.0;
};

struct LinkConfig {
  std::vector<SpanConfig> spans;
  double launch_power_dbm = std::numeric_limits<double>::quiet_NaN();
  double preamp_gain_db = 0.0;  ///< receiver preamplifier
  double noise_figure_db = 5.0;
  bool ase = true;
};

struct NetworkConfig {
  bool enabled = true;
  std::string kind = "mzdi";  ///< mzdi | mrr
  int n_banks = 2;
  int n_filters = 1;
  double bandwidth_ghz = 40.0;
  double center_offset_ghz = 0.0;  ///< network center relative to carrier
  double bank_spacing_ghz = 0.0;
  double filter_spacing_ghz = 0.0;
  std::vector<double> bank_offsets_ghz;  ///< overrides bank_spacing_ghz
  bool center_banks = false;  ///< recenters the bank ladder on the offset
  bool auto_span = false;
  double span_ghz = 0.0;
  double input_coupling = 0.5;
  double output_coupling = 0.5;
  double feedback = 0.5;
  double loop_delay_ps = 9.0;
  double loop_phase_rad = M_PI;
  double link_delay_ps = 0.0;
  double link_transmission = 1.0;
  bool per_filter_loops = false;
  double mrr_radius_um = 55.0;
  double mrr_loss_db_cm = 0.4;
  double mrr_coupling = 0.0;  ///< if > 0, overrides bandwidth
  double n_eff = 2.6;

  TopologyTemplate to_template() const;
};

struct ReceiverConfig {
  double responsivity_a_w = 0.8;
  double pd_bandwidth_ghz = 35.0;
  double thermal_pa_sqrt_hz = 10.0;
  bool shot_noise = true;
  bool thermal_noise = true;
  int adc_bits = 8;
  double adc_bandwidth_ghz = 35.0;
};

struct ReadoutConfig {
  int taps = 0;       ///< FFE window width; 0 = from the dispersion spread
  int taps_pre = -1;  ///< causal window override (-1 = centered)
  int taps_post = -1;
  double lambda = std::numeric_limits<double>::quiet_NaN();  ///< NaN = grid
  int train_symbols = 16384;
  int test_symbols = 0;  ///< 0 = everything after training
  int guard_symbols = 256;
};

struct BaselinesConfig {
  bool no_feedback = false;  ///< same filters, open loop
  bool ffe = false;          ///< taps follow the readout window
  int volterra_k1 = 0, volterra_k2 = 0, volterra_k3 = 0;
  int mlse_taps = 0;
};

struct PerturbConfig {
  int instances = 0;
  double relative_jitter = 0.002;
  double n_eff_std = 0.002;
};

struct NarmaConfig {
  int washout = 87;
  int train = 2000;
  int test = 2000;
};

struct MemcapConfig {
  int i_max = 25;
  int repeats = 3;
  int train = 2800;
  std::vector<double> feedback_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> detuning_grid_ghz = {7.0, 10.0, 13.0};
};

struct FadingConfig {
  double max_freq_ghz = 35.0;
  int n_tones = 384;
};

struct AssertionConfig {
  std::string metric;
  std::string variant;  ///< empty matches every variant
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
};

struct SweepAxis {
  std::string path;  ///< dotted key path, e.g. "network.bandwidth_ghz"
  std::vector<double> values;
};

struct ExperimentConfig {
  Task task = Task::equalize;
  int symbols = 32768;
  ModulationConfig modulation;
  LaserConfig laser;
  LinkConfig link;
  NetworkConfig network;
  ReceiverConfig receiver;
  ReadoutConfig readout;
  BaselinesConfig baselines;
  PerturbConfig perturb;
  NarmaConfig narma;
  MemcapConfig memcap;
  FadingConfig fading;
  std::vector<AssertionConfig> assertions;
  std::vector<SweepAxis> sweep;
};

/// Parses and validates a config document. Unknown keys, malformed values
/// and inconsistent sizes throw std::invalid_argument with the key path.
ExperimentConfig parse_config(const ordered_json& j);

/// Canonical re-emission of a parsed config; the FNV-1a hash of its dump
/// is the config identity in results.csv.
ordered_json resolved_config(const ExperimentConfig& c);

std::uint64_t fnv1a(std::string_view bytes);

/// Built-in tuned config for each task (the CLI default when no --config
/// is given).
ordered_json default_config(Task t);

struct Record {
  std::size_t point = 0;     ///< sweep grid index (0 for plain runs)
  std::string params;        ///< "a=1;b=2" resolved sweep coordinates
  std::string variant;       ///< ross | no_feedback | ffe | volterra | mlse...
  std::string metric;        ///< ber | ser | nmse | mc | null_freq_hz | ...
  double value = 0.0;
  std::size_t samples = 0;   ///< symbols / instances behind the value
  double wall_time_s = 0.0;  ///< zeroed under deterministic mode
};

struct RunResult {
  std::vector<Record> records;
  ordered_json resolved;
  std::uint64_t config_hash = 0;
  std::vector<std::string> assertion_failures;
};

/// Runs the configured task (expanding the sweep grid when present) and
/// evaluates assertions. workers bounds the number of concurrent sweep
/// points; deterministic zeroes wall times so reruns are byte-identical.
RunResult run_experiment(const ExperimentConfig& c, std::uint64_t seed,
                         int workers = 1, bool deterministic = false);

/// CSV with one row per record, stable formatting (%.17g).
std::string results_csv(const RunResult& r);

}  // namespace ross
