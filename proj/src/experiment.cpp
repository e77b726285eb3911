#include "ross/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "ross/baselines.hpp"
#include "ross/benchmarks.hpp"
#include "ross/fiber.hpp"
#include "ross/readout.hpp"
#include "ross/receiver.hpp"
#include "ross/rng.hpp"

namespace ross {

namespace {

constexpr double kC = 299792458.0;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

/// Section reader that tracks visited keys; finish() rejects leftovers so
/// typos in configs and sweep paths never pass silently.
class Keys {
 public:
  Keys(const ordered_json& j, std::string path)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw std::invalid_argument(path_ + " must be a JSON object");
  }

  bool has(const char* k) {
    seen_.insert(k);
    return j_.contains(k);
  }

  double num(const char* k, double def) {
    if (!has(k)) return def;
    const auto& v = j_.at(k);
    if (!v.is_number())
      throw std::invalid_argument(path_ + "." + k + " must be a number");
    return v.get<double>();
  }

  int integer(const char* k, int def) {
    if (!has(k)) return def;
    const auto& v = j_.at(k);
    if (!v.is_number_integer())
      throw std::invalid_argument(path_ + "." + k + " must be an integer");
    return v.get<int>();
  }

  bool flag(const char* k, bool def) {
    if (!has(k)) return def;
    const auto& v = j_.at(k);
    if (!v.is_boolean())
      throw std::invalid_argument(path_ + "." + k + " must be a boolean");
    return v.get<bool>();
  }

  std::string str(const char* k, std::string def) {
    if (!has(k)) return def;
    const auto& v = j_.at(k);
    if (!v.is_string())
      throw std::invalid_argument(path_ + "." + k + " must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* k, std::vector<double> def) {
    if (!has(k)) return def;
    const auto& v = j_.at(k);
    if (!v.is_array())
      throw std::invalid_argument(path_ + "." + k + " must be an array");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number())
        throw std::invalid_argument(path_ + "." + k + " must hold numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  const ordered_json* section(const char* k) {
    return has(k) ? &j_.at(k) : nullptr;
  }

  void finish() {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw std::invalid_argument("unknown config key " + path_ + "." +
                                    item.key());
  }

 private:
  const ordered_json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

LaserConfig parse_laser(const ordered_json& j) {
  Keys k(j, "laser");
  LaserConfig c;
  c.mode = k.str("mode", c.mode);
  if (c.mode != "cw" && c.mode != "lk")
    throw std::invalid_argument("laser.mode must be \"cw\" or \"lk\"");
  c.power_dbm = k.num("power_dbm", c.power_dbm);
  c.linewidth_khz = k.num("linewidth_khz", c.linewidth_khz);
  c.wavelength_nm = k.num("wavelength_nm", c.wavelength_nm);
  if (c.wavelength_nm < 600.0 || c.wavelength_nm > 2500.0)
    throw std::invalid_argument("laser.wavelength_nm out of range");
  c.lk_noise = k.flag("lk_noise", c.lk_noise);
  k.finish();
  return c;
}

ModulationConfig parse_modulation(const ordered_json& j) {
  Keys k(j, "modulation");
  ModulationConfig c;
  c.format = k.str("format", c.format);
  c.format_enum();  // validates the name
  c.baud_gbd = k.num("baud_gbd", c.baud_gbd);
  if (c.baud_gbd <= 0.0)
    throw std::invalid_argument("modulation.baud_gbd must be positive");
  c.oversampling = k.integer("oversampling", c.oversampling);
  if (c.oversampling < 2)
    throw std::invalid_argument("modulation.oversampling must be >= 2");
  c.mzm_bandwidth_ghz = k.num("mzm_bandwidth_ghz", c.mzm_bandwidth_ghz);
  c.extinction_ratio_db = k.num("extinction_ratio_db", c.extinction_ratio_db);
  c.cspr_db = k.num("cspr_db", c.cspr_db);
  c.analog_full_scale = k.num("analog_full_scale", c.analog_full_scale);
  k.finish();
  return c;
}

SpanConfig parse_span(const ordered_json& j, int index) {
  Keys k(j, "link.spans[" + std::to_string(index) + "]");
  SpanConfig c;
  c.length_km = k.num("length_km", c.length_km);
  if (c.length_km < 0.0)
    throw std::invalid_argument("span length_km must be >= 0");
  c.dispersion_ps_nm_km = k.num("dispersion_ps_nm_km", c.dispersion_ps_nm_km);
  c.alpha_db_km = k.num("alpha_db_km", c.alpha_db_km);
  c.gamma_per_w_km = k.num("gamma_per_w_km", c.gamma_per_w_km);
  c.post_gain_db = k.num("post_gain_db", c.post_gain_db);
  c.max_step_m = k.num("max_step_m", c.max_step_m);
  if (c.max_step_m <= 0.0)
    throw std::invalid_argument("span max_step_m must be positive");
  k.finish();
  return c;
}

LinkConfig parse_link(const ordered_json& j) {
  Keys k(j, "link");
  LinkConfig c;
  if (const ordered_json* spans = k.section("spans")) {
    if (!spans->is_array())
      throw std::invalid_argument("link.spans must be an array");
    int i = 0;
    for (const auto& s : *spans) c.spans.push_back(parse_span(s, i++));
  }
  c.launch_power_dbm = k.num("launch_power_dbm", c.launch_power_dbm);
  c.preamp_gain_db = k.num("preamp_gain_db", c.preamp_gain_db);
  c.noise_figure_db = k.num("noise_figure_db", c.noise_figure_db);
  c.ase = k.flag("ase", c.ase);
  k.finish();
  return c;
}

NetworkConfig parse_network(const ordered_json& j) {
  Keys k(j, "network");
  NetworkConfig c;
  c.enabled = k.flag("enabled", c.enabled);
  c.kind = k.str("kind", c.kind);
  if (c.kind != "mzdi" && c.kind != "mrr")
    throw std::invalid_argument("network.kind must be \"mzdi\" or \"mrr\"");
  c.n_banks = k.integer("n_banks", c.n_banks);
  c.n_filters = k.integer("n_filters", c.n_filters);
  if (c.n_banks < 1 || c.n_filters < 1 || c.n_banks * c.n_filters > 256)
    throw std::invalid_argument("network size must be 1..256 filters");
  c.bandwidth_ghz = k.num("bandwidth_ghz", c.bandwidth_ghz);
  if (c.bandwidth_ghz <= 0.0)
    throw std::invalid_argument("network.bandwidth_ghz must be positive");
  c.center_offset_ghz = k.num("center_offset_ghz", c.center_offset_ghz);
  c.bank_spacing_ghz = k.num("bank_spacing_ghz", c.bank_spacing_ghz);
  c.filter_spacing_ghz = k.num("filter_spacing_ghz", c.filter_spacing_ghz);
  c.bank_offsets_ghz = k.numbers("bank_offsets_ghz", c.bank_offsets_ghz);
  if (!c.bank_offsets_ghz.empty() &&
      c.bank_offsets_ghz.size() != static_cast<std::size_t>(c.n_banks))
    throw std::invalid_argument("network.bank_offsets_ghz must list one "
                                "offset per bank");
  c.center_banks = k.flag("center_banks", c.center_banks);
  c.auto_span = k.flag("auto_span", c.auto_span);
  c.span_ghz = k.num("span_ghz", c.span_ghz);
  c.input_coupling = k.num("input_coupling", c.input_coupling);
  c.output_coupling = k.num("output_coupling", c.output_coupling);
  c.feedback = k.num("feedback", c.feedback);
  c.loop_delay_ps = k.num("loop_delay_ps", c.loop_delay_ps);
  c.loop_phase_rad = k.num("loop_phase_rad", c.loop_phase_rad);
  c.link_delay_ps = k.num("link_delay_ps", c.link_delay_ps);
  c.link_transmission = k.num("link_transmission", c.link_transmission);
  c.per_filter_loops = k.flag("per_filter_loops", c.per_filter_loops);
  c.mrr_radius_um = k.num("mrr_radius_um", c.mrr_radius_um);
  c.mrr_loss_db_cm = k.num("mrr_loss_db_cm", c.mrr_loss_db_cm);
  c.mrr_coupling = k.num("mrr_coupling", c.mrr_coupling);
  c.n_eff = k.num("n_eff", c.n_eff);
  k.finish();
  return c;
}

ReceiverConfig parse_receiver(const ordered_json& j) {
  Keys k(j, "receiver");
  ReceiverConfig c;
  c.responsivity_a_w = k.num("responsivity_a_w", c.responsivity_a_w);
  c.pd_bandwidth_ghz = k.num("pd_bandwidth_ghz", c.pd_bandwidth_ghz);
  c.thermal_pa_sqrt_hz = k.num("thermal_pa_sqrt_hz", c.thermal_pa_sqrt_hz);
  c.shot_noise = k.flag("shot_noise", c.shot_noise);
  c.thermal_noise = k.flag("thermal_noise", c.thermal_noise);
  c.adc_bits = k.integer("adc_bits", c.adc_bits);
  c.adc_bandwidth_ghz = k.num("adc_bandwidth_ghz", c.adc_bandwidth_ghz);
  k.finish();
  return c;
}

ReadoutConfig parse_readout(const ordered_json& j) {
  Keys k(j, "readout");
  ReadoutConfig c;
  c.taps = k.integer("taps", c.taps);
  c.taps_pre = k.integer("taps_pre", c.taps_pre);
  c.taps_post = k.integer("taps_post", c.taps_post);
  c.lambda = k.num("lambda", c.lambda);
  c.train_symbols = k.integer("train_symbols", c.train_symbols);
  c.test_symbols = k.integer("test_symbols", c.test_symbols);
  c.guard_symbols = k.integer("guard_symbols", c.guard_symbols);
  if (c.train_symbols < 64)
    throw std::invalid_argument("readout.train_symbols must be >= 64");
  if (c.guard_symbols < 0 || c.test_symbols < 0)
    throw std::invalid_argument("readout guard/test symbol counts must be >= 0");
  k.finish();
  return c;
}

BaselinesConfig parse_baselines(const ordered_json& j) {
  Keys k(j, "baselines");
  BaselinesConfig c;
  c.no_feedback = k.flag("no_feedback", c.no_feedback);
  c.ffe = k.flag("ffe", c.ffe);
  c.volterra_k1 = k.integer("volterra_k1", c.volterra_k1);
  c.volterra_k2 = k.integer("volterra_k2", c.volterra_k2);
  c.volterra_k3 = k.integer("volterra_k3", c.volterra_k3);
  c.mlse_taps = k.integer("mlse_taps", c.mlse_taps);
  k.finish();
  return c;
}

PerturbConfig parse_perturb(const ordered_json& j) {
  Keys k(j, "perturb");
  PerturbConfig c;
  c.instances = k.integer("instances", c.instances);
  c.relative_jitter = k.num("relative_jitter", c.relative_jitter);
  c.n_eff_std = k.num("n_eff_std", c.n_eff_std);
  if (c.instances < 0)
    throw std::invalid_argument("perturb.instances must be >= 0");
  k.finish();
  return c;
}

NarmaConfig parse_narma(const ordered_json& j) {
  Keys k(j, "narma");
  NarmaConfig c;
  c.washout = k.integer("washout", c.washout);
  c.train = k.integer("train", c.train);
  c.test = k.integer("test", c.test);
  if (c.washout < 0 || c.train < 64 || c.test < 64)
    throw std::invalid_argument("narma needs washout >= 0 and >= 64 "
                                "train/test symbols");
  k.finish();
  return c;
}

MemcapConfig parse_memcap(const ordered_json& j) {
  Keys k(j, "memcap");
  MemcapConfig c;
  c.i_max = k.integer("i_max", c.i_max);
  c.repeats = k.integer("repeats", c.repeats);
  c.train = k.integer("train", c.train);
  c.feedback_grid = k.numbers("feedback_grid", c.feedback_grid);
  c.detuning_grid_ghz = k.numbers("detuning_grid_ghz", c.detuning_grid_ghz);
  if (c.i_max < 1 || c.repeats < 1 || c.train < 64)
    throw std::invalid_argument("memcap needs i_max, repeats >= 1 and "
                                "train >= 64");
  if (c.feedback_grid.empty() || c.detuning_grid_ghz.empty())
    throw std::invalid_argument("memcap grids must be nonempty");
  k.finish();
  return c;
}

FadingConfig parse_fading(const ordered_json& j) {
  Keys k(j, "fading");
  FadingConfig c;
  c.max_freq_ghz = k.num("max_freq_ghz", c.max_freq_ghz);
  c.n_tones = k.integer("n_tones", c.n_tones);
  if (c.max_freq_ghz <= 0.0 || c.n_tones < 8)
    throw std::invalid_argument("fading needs max_freq_ghz > 0 and "
                                "n_tones >= 8");
  k.finish();
  return c;
}

AssertionConfig parse_assertion(const ordered_json& j, int index) {
  Keys k(j, "assertions[" + std::to_string(index) + "]");
  AssertionConfig c;
  c.metric = k.str("metric", "");
  if (c.metric.empty())
    throw std::invalid_argument("assertions need a metric name");
  c.variant = k.str("variant", "");
  c.min = k.num("min", c.min);
  c.max = k.num("max", c.max);
  if (std::isnan(c.min) && std::isnan(c.max))
    throw std::invalid_argument("assertion on " + c.metric +
                                " needs min and/or max");
  k.finish();
  return c;
}

SweepAxis parse_axis(const ordered_json& j, int index) {
  Keys k(j, "sweep[" + std::to_string(index) + "]");
  SweepAxis a;
  a.path = k.str("path", "");
  a.values = k.numbers("values", {});
  if (a.path.empty() || a.values.empty())
    throw std::invalid_argument("sweep axes need a path and values");
  k.finish();
  return a;
}

}  // namespace

std::string task_name(Task t) {
  switch (t) {
    case Task::narma: return "narma";
    case Task::equalize: return "equalize";
    case Task::memcap: return "memcap";
    case Task::fading: return "fading";
    case Task::scan: return "scan";
  }
  throw std::logic_error("unhandled task");
}

Task parse_task(const std::string& name) {
  if (name == "narma") return Task::narma;
  if (name == "equalize") return Task::equalize;
  if (name == "memcap") return Task::memcap;
  if (name == "fading") return Task::fading;
  if (name == "scan") return Task::scan;
  throw std::invalid_argument("unknown task \"" + name + "\"");
}

double LaserConfig::carrier_hz() const { return kC / (wavelength_nm * 1e-9); }

double LaserConfig::power_w() const {
  return 1e-3 * std::pow(10.0, power_dbm / 10.0);
}

ModFormat ModulationConfig::format_enum() const {
  if (format == "pam4") return ModFormat::pam4;
  if (format == "qam16") return ModFormat::qam16;
  if (format == "qam32") return ModFormat::qam32;
  if (format == "analog") return ModFormat::analog;
  throw std::invalid_argument("unknown modulation format \"" + format + "\"");
}

TopologyTemplate NetworkConfig::to_template() const {
  TopologyTemplate t;
  t.n_banks = n_banks;
  t.n_filters = n_filters;
  t.kind = kind == "mrr" ? FilterKind::mrr : FilterKind::mzdi;
  t.bandwidth_hz = bandwidth_ghz * 1e9;
  t.mrr_coupling = mrr_coupling;
  t.mrr_radius_m = mrr_radius_um * 1e-6;
  t.mrr_loss_db_cm = mrr_loss_db_cm;
  t.n_eff = n_eff;
  t.center_hz = center_offset_ghz * 1e9;
  t.filter_spacing_hz = filter_spacing_ghz * 1e9;
  t.auto_span = auto_span;
  t.span_hz = span_ghz * 1e9;
  t.link_delay_s = link_delay_ps * 1e-12;
  t.link_transmission = link_transmission;
  t.input_coupling = input_coupling;
  t.output_coupling = output_coupling;
  t.feedback_amplitude = feedback;
  t.loop_delay_s = loop_delay_ps * 1e-12;
  t.loop_phase_rad = loop_phase_rad;
  t.per_filter_loops = per_filter_loops;
  if (!auto_span) {
    std::vector<double> offsets(static_cast<std::size_t>(n_banks));
    for (int k = 0; k < n_banks; ++k)
      offsets[k] = bank_offsets_ghz.empty() ? k * bank_spacing_ghz * 1e9
                                            : bank_offsets_ghz[k] * 1e9;
    if (center_banks) {
      double mean = 0.0;
      for (double o : offsets) mean += o;
      mean /= static_cast<double>(n_banks);
      for (double& o : offsets) o -= mean;
    }
    t.bank_offsets_hz = std::move(offsets);
  }
  return t;
}

ExperimentConfig parse_config(const ordered_json& j) {
  Keys k(j, "config");
  ExperimentConfig c;
  c.task = parse_task(k.str("task", task_name(c.task)));
  c.symbols = k.integer("symbols", c.symbols);
  if (const auto* s = k.section("modulation")) c.modulation = parse_modulation(*s);
  if (const auto* s = k.section("laser")) c.laser = parse_laser(*s);
  if (const auto* s = k.section("link")) c.link = parse_link(*s);
  if (const auto* s = k.section("network")) c.network = parse_network(*s);
  if (const auto* s = k.section("receiver")) c.receiver = parse_receiver(*s);
  if (const auto* s = k.section("readout")) c.readout = parse_readout(*s);
  if (const auto* s = k.section("baselines")) c.baselines = parse_baselines(*s);
  if (const auto* s = k.section("perturb")) c.perturb = parse_perturb(*s);
  if (const auto* s = k.section("narma")) c.narma = parse_narma(*s);
  if (const auto* s = k.section("memcap")) c.memcap = parse_memcap(*s);
  if (const auto* s = k.section("fading")) c.fading = parse_fading(*s);
  if (const auto* s = k.section("assertions")) {
    if (!s->is_array())
      throw std::invalid_argument("assertions must be an array");
    int i = 0;
    for (const auto& a : *s) c.assertions.push_back(parse_assertion(a, i++));
  }
  if (const auto* s = k.section("sweep")) {
    if (!s->is_array()) throw std::invalid_argument("sweep must be an array");
    int i = 0;
    for (const auto& a : *s) c.sweep.push_back(parse_axis(a, i++));
  }
  k.finish();

  const long samples =
      static_cast<long>(c.symbols) * static_cast<long>(c.modulation.oversampling);
  if (c.symbols < 256 || (samples & (samples - 1)) != 0)
    throw std::invalid_argument(
        "symbols * modulation.oversampling = " + std::to_string(samples) +
        " must be a power of two (the spectral pipeline runs on radix-2 "
        "grids) with symbols >= 256");
  const int adc_bits = c.receiver.adc_bits;
  if (adc_bits < 1 || adc_bits > 16)
    throw std::invalid_argument("receiver.adc_bits must be 1..16");
  return c;
}

ordered_json resolved_config(const ExperimentConfig& c) {
  ordered_json j;
  j["task"] = task_name(c.task);
  j["symbols"] = c.symbols;
  {
    ordered_json m;
    m["format"] = c.modulation.format;
    m["baud_gbd"] = c.modulation.baud_gbd;
    m["oversampling"] = c.modulation.oversampling;
    m["mzm_bandwidth_ghz"] = c.modulation.mzm_bandwidth_ghz;
    m["extinction_ratio_db"] = c.modulation.extinction_ratio_db;
    m["cspr_db"] = c.modulation.cspr_db;
    m["analog_full_scale"] = c.modulation.analog_full_scale;
    j["modulation"] = std::move(m);
  }
  {
    ordered_json m;
    m["mode"] = c.laser.mode;
    m["power_dbm"] = c.laser.power_dbm;
    m["linewidth_khz"] = c.laser.linewidth_khz;
    m["wavelength_nm"] = c.laser.wavelength_nm;
    m["lk_noise"] = c.laser.lk_noise;
    j["laser"] = std::move(m);
  }
  {
    ordered_json m;
    ordered_json spans = ordered_json::array();
    for (const auto& s : c.link.spans) {
      ordered_json sj;
      sj["length_km"] = s.length_km;
      sj["dispersion_ps_nm_km"] = s.dispersion_ps_nm_km;
      sj["alpha_db_km"] = s.alpha_db_km;
      sj["gamma_per_w_km"] = s.gamma_per_w_km;
      sj["post_gain_db"] = s.post_gain_db;
      sj["max_step_m"] = s.max_step_m;
      spans.push_back(std::move(sj));
    }
    m["spans"] = std::move(spans);
    if (!std::isnan(c.link.launch_power_dbm))
      m["launch_power_dbm"] = c.link.launch_power_dbm;
    m["preamp_gain_db"] = c.link.preamp_gain_db;
    m["noise_figure_db"] = c.link.noise_figure_db;
    m["ase"] = c.link.ase;
    j["link"] = std::move(m);
  }
  {
    ordered_json m;
    m["enabled"] = c.network.enabled;
    m["kind"] = c.network.kind;
    m["n_banks"] = c.network.n_banks;
    m["n_filters"] = c.network.n_filters;
    m["bandwidth_ghz"] = c.network.bandwidth_ghz;
    m["center_offset_ghz"] = c.network.center_offset_ghz;
    m["bank_spacing_ghz"] = c.network.bank_spacing_ghz;
    m["filter_spacing_ghz"] = c.network.filter_spacing_ghz;
    if (!c.network.bank_offsets_ghz.empty())
      m["bank_offsets_ghz"] = c.network.bank_offsets_ghz;
    m["center_banks"] = c.network.center_banks;
    m["auto_span"] = c.network.auto_span;
    m["span_ghz"] = c.network.span_ghz;
    m["input_coupling"] = c.network.input_coupling;
    m["output_coupling"] = c.network.output_coupling;
    m["feedback"] = c.network.feedback;
    m["loop_delay_ps"] = c.network.loop_delay_ps;
    m["loop_phase_rad"] = c.network.loop_phase_rad;
    m["link_delay_ps"] = c.network.link_delay_ps;
    m["link_transmission"] = c.network.link_transmission;
    m["per_filter_loops"] = c.network.per_filter_loops;
    m["mrr_radius_um"] = c.network.mrr_radius_um;
    m["mrr_loss_db_cm"] = c.network.mrr_loss_db_cm;
    m["mrr_coupling"] = c.network.mrr_coupling;
    m["n_eff"] = c.network.n_eff;
    j["network"] = std::move(m);
  }
  {
    ordered_json m;
    m["responsivity_a_w"] = c.receiver.responsivity_a_w;
    m["pd_bandwidth_ghz"] = c.receiver.pd_bandwidth_ghz;
    m["thermal_pa_sqrt_hz"] = c.receiver.thermal_pa_sqrt_hz;
    m["shot_noise"] = c.receiver.shot_noise;
    m["thermal_noise"] = c.receiver.thermal_noise;
    m["adc_bits"] = c.receiver.adc_bits;
    m["adc_bandwidth_ghz"] = c.receiver.adc_bandwidth_ghz;
    j["receiver"] = std::move(m);
  }
  {
    ordered_json m;
    m["taps"] = c.readout.taps;
    m["taps_pre"] = c.readout.taps_pre;
    m["taps_post"] = c.readout.taps_post;
    if (!std::isnan(c.readout.lambda)) m["lambda"] = c.readout.lambda;
    m["train_symbols"] = c.readout.train_symbols;
    m["test_symbols"] = c.readout.test_symbols;
    m["guard_symbols"] = c.readout.guard_symbols;
    j["readout"] = std::move(m);
  }
  {
    ordered_json m;
    m["no_feedback"] = c.baselines.no_feedback;
    m["ffe"] = c.baselines.ffe;
    m["volterra_k1"] = c.baselines.volterra_k1;
    m["volterra_k2"] = c.baselines.volterra_k2;
    m["volterra_k3"] = c.baselines.volterra_k3;
    m["mlse_taps"] = c.baselines.mlse_taps;
    j["baselines"] = std::move(m);
  }
  {
    ordered_json m;
    m["instances"] = c.perturb.instances;
    m["relative_jitter"] = c.perturb.relative_jitter;
    m["n_eff_std"] = c.perturb.n_eff_std;
    j["perturb"] = std::move(m);
  }
  {
    ordered_json m;
    m["washout"] = c.narma.washout;
    m["train"] = c.narma.train;
    m["test"] = c.narma.test;
    j["narma"] = std::move(m);
  }
  {
    ordered_json m;
    m["i_max"] = c.memcap.i_max;
    m["repeats"] = c.memcap.repeats;
    m["train"] = c.memcap.train;
    m["feedback_grid"] = c.memcap.feedback_grid;
    m["detuning_grid_ghz"] = c.memcap.detuning_grid_ghz;
    j["memcap"] = std::move(m);
  }
  {
    ordered_json m;
    m["max_freq_ghz"] = c.fading.max_freq_ghz;
    m["n_tones"] = c.fading.n_tones;
    j["fading"] = std::move(m);
  }
  if (!c.assertions.empty()) {
    ordered_json arr = ordered_json::array();
    for (const auto& a : c.assertions) {
      ordered_json e;
      e["metric"] = a.metric;
      if (!a.variant.empty()) e["variant"] = a.variant;
      if (!std::isnan(a.min)) e["min"] = a.min;
      if (!std::isnan(a.max)) e["max"] = a.max;
      arr.push_back(std::move(e));
    }
    j["assertions"] = std::move(arr);
  }
  if (!c.sweep.empty()) {
    ordered_json arr = ordered_json::array();
    for (const auto& a : c.sweep) {
      ordered_json e;
      e["path"] = a.path;
      e["values"] = a.values;
      arr.push_back(std::move(e));
    }
    j["sweep"] = std::move(arr);
  }
  return j;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Pipeline stages

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

class Timer {
 public:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ =
      std::chrono::steady_clock::now();
};

void add_record(std::vector<Record>& recs, std::size_t point,
                const std::string& params, const std::string& variant,
                const std::string& metric, double value, std::size_t samples,
                double wall, bool deterministic) {
  Record r;
  r.point = point;
  r.params = params;
  r.variant = variant;
  r.metric = metric;
  r.value = value;
  r.samples = samples;
  r.wall_time_s = deterministic ? 0.0 : wall;
  recs.push_back(std::move(r));
}

std::string join_params(const std::string& base, const std::string& extra) {
  if (base.empty()) return extra;
  if (extra.empty()) return base;
  return base + ";" + extra;
}

FiberSpec to_fiber(const SpanConfig& s, double lambda_nm) {
  return FiberSpec::from_link_units(s.length_km, s.dispersion_ps_nm_km,
                                    s.alpha_db_km, s.gamma_per_w_km, lambda_nm,
                                    s.max_step_m);
}

TxSpec to_tx(const ExperimentConfig& c, std::uint64_t laser_seed) {
  TxSpec tx;
  tx.laser.mode = c.laser.mode == "lk" ? LaserSpec::Mode::lang_kobayashi
                                       : LaserSpec::Mode::phase_noise_cw;
  tx.laser.power_w = c.laser.power_w();
  tx.laser.linewidth_hz = c.laser.linewidth_khz * 1e3;
  tx.laser.lk.noise = c.laser.lk_noise;
  tx.laser.seed = laser_seed;
  tx.oversampling = c.modulation.oversampling;
  tx.mzm_bandwidth_hz = c.modulation.mzm_bandwidth_ghz * 1e9;
  tx.extinction_ratio_db = c.modulation.extinction_ratio_db;
  tx.cspr_db = c.modulation.cspr_db;
  tx.analog_full_scale = c.modulation.analog_full_scale;
  return tx;
}

/// Transmitter + link output shared by every variant of a run and, via the
/// cache, by sweep points whose tx/link sub-config coincides (common random
/// numbers across network parameter scans).
struct ChannelOutput {
  SymbolStream stream;
  SampledWaveform wave;
  std::vector<double> drive;
};

std::shared_ptr<const ChannelOutput> build_channel(const ExperimentConfig& c,
                                                   std::uint64_t seed,
                                                   std::vector<double> drive) {
  ordered_json full = resolved_config(c);
  ordered_json key;
  key["symbols"] = full["symbols"];
  key["modulation"] = full["modulation"];
  key["laser"] = full["laser"];
  key["link"] = full["link"];
  std::uint64_t h = fnv1a(key.dump());
  std::uint64_t mix = seed;
  h ^= splitmix64(mix);
  if (!drive.empty())
    h ^= fnv1a(std::string_view(reinterpret_cast<const char*>(drive.data()),
                                drive.size() * sizeof(double)));

  static std::mutex mu;
  static std::unordered_map<std::uint64_t, std::shared_ptr<const ChannelOutput>>
      cache;
  static std::deque<std::uint64_t> order;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(h);
    if (it != cache.end()) return it->second;
  }

  auto out = std::make_shared<ChannelOutput>();
  const ModFormat fmt = c.modulation.format_enum();
  const double baud = c.modulation.baud_gbd * 1e9;
  if (fmt == ModFormat::analog) {
    if (drive.size() != static_cast<std::size_t>(c.symbols))
      throw std::invalid_argument(
          "analog modulation needs one drive value per symbol");
    out->stream = analog_stream(drive, baud);
  } else {
    if (!drive.empty())
      throw std::logic_error("drive values are only for analog modulation");
    out->stream = generate_symbols(fmt, static_cast<std::size_t>(c.symbols),
                                   baud, derive_seed(seed, "symbols"));
  }
  out->drive = std::move(drive);

  out->wave = modulate(out->stream, to_tx(c, derive_seed(seed, "laser")));
  if (!std::isnan(c.link.launch_power_dbm)) {
    const double target = 1e-3 * std::pow(10.0, c.link.launch_power_dbm / 10.0);
    const double now = mean_power(out->wave);
    if (now <= 0.0) throw std::runtime_error("modulated field has zero power");
    const double scale = std::sqrt(target / now);
    for (cplx& s : out->wave.samples) s *= scale;
  }
  const double carrier = c.laser.carrier_hz();
  int span_index = 0;
  for (const SpanConfig& s : c.link.spans) {
    // length 0 = back-to-back reference; the span's amplifier still applies
    if (s.length_km > 0.0)
      out->wave = propagate(out->wave, to_fiber(s, c.laser.wavelength_nm));
    if (s.post_gain_db != 0.0) {
      AmplifierSpec amp;
      amp.gain_db = s.post_gain_db;
      amp.noise_figure_db = c.link.noise_figure_db;
      amp.center_frequency_hz = carrier;
      amp.noise_on = c.link.ase;
      out->wave =
          amplify(out->wave, amp,
                  derive_seed(seed, "ase-span",
                              static_cast<std::uint64_t>(span_index)));
    }
    ++span_index;
  }
  if (c.link.preamp_gain_db != 0.0) {
    AmplifierSpec amp;
    amp.gain_db = c.link.preamp_gain_db;
    amp.noise_figure_db = c.link.noise_figure_db;
    amp.center_frequency_hz = carrier;
    amp.noise_on = c.link.ase;
    out->wave = amplify(out->wave, amp, derive_seed(seed, "ase-preamp"));
  }

  std::lock_guard<std::mutex> lock(mu);
  if (cache.emplace(h, out).second) {
    order.push_back(h);
    while (order.size() > 6) {  // channel waveforms are a few MB each
      cache.erase(order.front());
      order.pop_front();
    }
  }
  return out;
}

std::vector<ElectricalWaveform> detect_outputs(
    const ExperimentConfig& c, const std::vector<SampledWaveform>& outs,
    std::uint64_t local_seed, std::uint64_t salt) {
  std::vector<ElectricalWaveform> es;
  es.reserve(outs.size());
  for (std::size_t i = 0; i < outs.size(); ++i) {
    PdSpec pd;
    pd.responsivity_a_w = c.receiver.responsivity_a_w;
    pd.bandwidth_hz = c.receiver.pd_bandwidth_ghz * 1e9;
    pd.thermal_noise_a_sqrt_hz = c.receiver.thermal_pa_sqrt_hz * 1e-12;
    pd.shot_noise = c.receiver.shot_noise;
    pd.thermal_noise = c.receiver.thermal_noise;
    pd.seed = derive_seed(local_seed, "pd", salt + i);
    es.push_back(photodetect(outs[i], pd));
  }
  return es;
}

TapWindow readout_window(const ExperimentConfig& c) {
  const ReadoutConfig& r = c.readout;
  if (r.taps_pre >= 0) return {r.taps_pre, std::max(r.taps_post, 0)};
  int k = r.taps;
  if (k <= 0) {
    // Window sized to the chromatic dispersion spread in symbols.
    double dl = 0.0;
    for (const SpanConfig& s : c.link.spans)
      dl += std::abs(s.dispersion_ps_nm_km * 1e-6 * s.length_km * 1e3);
    const double lam = c.laser.wavelength_nm * 1e-9;
    const double baud = c.modulation.baud_gbd * 1e9;
    const double spread_s = dl * (lam * lam * baud / kC);
    const int m = static_cast<int>(std::ceil(spread_s * baud / 2.0)) + 2;
    k = std::clamp(2 * m + 1, 11, 71);
  }
  if (k % 2 == 0) ++k;
  return {k / 2, k / 2};
}

/// Resolves each output's ADC sampling phase by the training error of a
/// small ridge fit on that output alone (each PD/ADC lane has its own clock
/// skew), then samples every output at its phase.
DecisionSamples sample_outputs(const ExperimentConfig& c,
                               const std::vector<ElectricalWaveform>& es,
                               const Eigen::MatrixXd& y_full, TapWindow win,
                               long score_start, long score_rows) {
  AdcSpec adc;
  adc.bits = c.receiver.adc_bits;
  const double baud = c.modulation.baud_gbd * 1e9;
  adc.rate_hz = baud;
  adc.analog_bandwidth_hz = c.receiver.adc_bandwidth_ghz * 1e9;
  const auto n_sym = static_cast<std::size_t>(c.symbols);
  const auto n_cal = static_cast<std::size_t>(score_start + score_rows);

  auto score = [&](const DecisionSamples& ds) {
    FeatureMatrix f = assemble_features(ds, win);
    const long r0 = score_start - static_cast<long>(f.first_symbol);
    if (r0 < 0 || r0 + score_rows > f.x.rows())
      throw std::logic_error("phase score window out of range");
    FeatureMatrix g;
    g.x = f.x.middleRows(r0, score_rows);
    g.first_symbol = static_cast<std::size_t>(score_start);
    standardize_features(g, static_cast<std::size_t>(score_rows));
    const Eigen::MatrixXd y = y_full.middleRows(score_start, score_rows);
    const double lam =
        1e-3 * g.x.squaredNorm() / static_cast<double>(score_rows);
    const Eigen::MatrixXd w = ridge_solve(g.x, y, lam);
    return (g.x * w - y).squaredNorm() / static_cast<double>(score_rows);
  };

  const double common =
      resolve_sampling_phase(es, adc, baud, n_sym, score, n_cal);
  DecisionSamples best = adc_sample_all(es, adc, baud, n_sym, common, n_cal);
  if (es.empty()) return best;

  // Refine per-output clock skew: one coordinate-descent pass over the
  // oversampling phase grid, scored jointly so lanes stay mutually aligned.
  const auto ov = static_cast<std::size_t>(
      std::lround(es.front().sample_rate / baud));
  double best_score = score(best);
  for (std::size_t i = 0; i < es.size(); ++i) {
    DecisionSamples trial = best;
    for (std::size_t k = 0; k < ov; ++k) {
      const double ph = static_cast<double>(k) / static_cast<double>(ov);
      trial.outputs[i] = adc_sample(es[i], adc, baud, n_sym, ph, n_cal);
      const double s = score(trial);
      if (s < best_score) {
        best_score = s;
        best.outputs[i] = trial.outputs[i];
      }
    }
  }
  return best;
}

struct EvalResult {
  double ber = kNan;
  double ser = kNan;
  double nmse = kNan;
  double lambda = 0.0;
  std::size_t n_test = 0;
};

/// Trains on rows [train_start, +n_train) in symbol coordinates, evaluates
/// on the following n_test symbols.
EvalResult evaluate_features(const FeatureMatrix& f,
                             const Eigen::MatrixXd& y_full,
                             const std::vector<cplx>* ref, ModFormat fmt,
                             double lambda_cfg, long train_start, long n_train,
                             long n_test) {
  const long r0 = train_start - static_cast<long>(f.first_symbol);
  if (r0 < 0)
    throw std::invalid_argument(
        "training start precedes the first full feature window (guard or "
        "washout too short)");
  if (r0 + n_train + n_test > f.x.rows())
    throw std::invalid_argument("not enough symbols for the train/test split");
  FeatureMatrix g;
  g.x = f.x.middleRows(r0, n_train + n_test);
  g.first_symbol = static_cast<std::size_t>(train_start);
  standardize_features(g, static_cast<std::size_t>(n_train));
  const Eigen::MatrixXd y = y_full.middleRows(train_start, n_train + n_test);

  const double lam = std::isnan(lambda_cfg)
                         ? select_lambda(g, y, static_cast<std::size_t>(n_train),
                                         fmt)
                         : lambda_cfg;
  const ReadoutModel model =
      train_readout(g, y, static_cast<std::size_t>(n_train), lam, fmt);
  const Eigen::MatrixXd est = predict(model, g);
  const Eigen::MatrixXd est_test = est.bottomRows(n_test);

  EvalResult r;
  r.lambda = lam;
  r.n_test = static_cast<std::size_t>(n_test);
  if (fmt == ModFormat::analog) {
    std::vector<double> pe(static_cast<std::size_t>(n_test));
    std::vector<double> ye(static_cast<std::size_t>(n_test));
    for (long t = 0; t < n_test; ++t) {
      pe[t] = est_test(t, 0);
      ye[t] = y(n_train + t, 0);
    }
    r.nmse = compute_nmse(pe, ye);
  } else {
    const std::vector<cplx> dec = decide(est_test, model);
    std::vector<cplx> refs(static_cast<std::size_t>(n_test));
    for (long t = 0; t < n_test; ++t)
      refs[t] = (*ref)[static_cast<std::size_t>(train_start + n_train + t)];
    r.ber = compute_ber(dec, refs, fmt);
    r.ser = compute_ser(dec, refs, fmt);
  }
  return r;
}

/// Sequence decision on the single-photodiode trace: LS channel estimate
/// with an alignment-shift search on the training segment, then Viterbi
/// over the train+test block.
EvalResult evaluate_mlse(const std::vector<double>& rx,
                         const std::vector<cplx>& symbols, ModFormat fmt,
                         int taps, long train_start, long n_train,
                         long n_test) {
  const auto& pts = constellation(fmt);
  std::vector<double> re_pts(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) re_pts[i] = pts[i].real();
  std::vector<double> levels(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i)
    levels[i] = symbols[i].real();

  int best_shift = 0;
  double best_res = std::numeric_limits<double>::infinity();
  double best_mean = 0.0;
  ChannelEstimate best_est;
  for (int s = -8; s <= 8; ++s) {
    const long lo = train_start + s;
    if (lo < 0 || lo + n_train > static_cast<long>(rx.size())) continue;
    double mean_rx = 0.0;
    for (long t = 0; t < n_train; ++t) mean_rx += rx[lo + t];
    mean_rx /= static_cast<double>(n_train);
    std::vector<double> rxv(static_cast<std::size_t>(n_train));
    std::vector<double> txv(static_cast<std::size_t>(n_train));
    for (long t = 0; t < n_train; ++t) {
      rxv[t] = rx[lo + t] - mean_rx;
      txv[t] = levels[train_start + t];
    }
    ChannelEstimate est;
    try {
      est = estimate_channel(rxv, txv, taps);
    } catch (const std::exception&) {
      continue;
    }
    if (est.residual_rms < best_res) {
      best_res = est.residual_rms;
      best_est = est;
      best_shift = s;
      best_mean = mean_rx;
    }
  }
  if (!std::isfinite(best_res))
    throw std::runtime_error("channel estimation failed at every alignment");

  const long block = n_train + n_test;
  std::vector<double> rxb(static_cast<std::size_t>(block));
  const auto last = static_cast<long>(rx.size()) - 1;
  for (long t = 0; t < block; ++t) {
    const long idx = std::clamp(train_start + t + best_shift, 0L, last);
    rxb[t] = rx[idx] - best_mean;
  }
  const std::vector<int> dec = mlse_viterbi(rxb, best_est.taps, re_pts);

  std::vector<cplx> decided(static_cast<std::size_t>(n_test));
  std::vector<cplx> refs(static_cast<std::size_t>(n_test));
  for (long t = 0; t < n_test; ++t) {
    decided[t] = pts[static_cast<std::size_t>(dec[n_train + t])];
    refs[t] = symbols[static_cast<std::size_t>(train_start + n_train + t)];
  }
  EvalResult r;
  r.n_test = static_cast<std::size_t>(n_test);
  r.ber = compute_ber(decided, refs, fmt);
  r.ser = compute_ser(decided, refs, fmt);
  return r;
}

// ---------------------------------------------------------------------------
// Task runners

void run_equalize(const ExperimentConfig& c, std::uint64_t seed,
                  std::uint64_t local, std::size_t point,
                  const std::string& params, std::vector<Record>& recs,
                  bool deterministic) {
  const ModFormat fmt = c.modulation.format_enum();
  if (fmt == ModFormat::analog)
    throw std::invalid_argument("equalize needs a digital format");
  const bool want_raw = c.baselines.ffe || c.baselines.volterra_k1 > 0 ||
                        c.baselines.mlse_taps > 0;
  if (want_raw && fmt != ModFormat::pam4)
    throw std::invalid_argument(
        "the single-photodiode baselines support PAM4 only");

  const auto chan = build_channel(c, seed, {});
  const long nsym = c.symbols;
  const int ycols = fmt == ModFormat::pam4 ? 1 : 2;
  Eigen::MatrixXd y_full(nsym, ycols);
  for (long n = 0; n < nsym; ++n) {
    y_full(n, 0) = chan->stream.symbols[n].real();
    if (ycols == 2) y_full(n, 1) = chan->stream.symbols[n].imag();
  }

  const TapWindow win = readout_window(c);
  const long guard = c.readout.guard_symbols;
  const long train_start = std::max<long>(guard, win.pre + 1);
  const long n_train = c.readout.train_symbols;
  // Tail margin covers the window, the MLSE shift search and the guard.
  const long end_margin = std::max<long>(guard, win.post + 9);
  const long cap = nsym - end_margin - train_start - n_train;
  long n_test = c.readout.test_symbols;
  if (n_test <= 0 || n_test > cap) n_test = cap;
  if (n_test < 256)
    throw std::invalid_argument(
        "fewer than 256 test symbols left after guards and training");
  const long score_rows = std::min<long>(n_train, 3072);

  auto run_filtered = [&](const std::string& name, const NetworkTopology& topo,
                          std::uint64_t salt) {
    Timer timer;
    const std::vector<SampledWaveform> outs = process(chan->wave, topo);
    const std::vector<ElectricalWaveform> es =
        detect_outputs(c, outs, local, salt);
    const DecisionSamples ds =
        sample_outputs(c, es, y_full, win, train_start, score_rows);
    const FeatureMatrix f = assemble_features(ds, win);
    const EvalResult ev =
        evaluate_features(f, y_full, &chan->stream.symbols, fmt,
                          c.readout.lambda, train_start, n_train, n_test);
    const double wall = timer.elapsed();
    add_record(recs, point, params, name, "ber", ev.ber, ev.n_test, wall,
               deterministic);
    add_record(recs, point, params, name, "ser", ev.ser, ev.n_test, wall,
               deterministic);
  };

  if (c.network.enabled) {
    run_filtered("ross", build_topology(c.network.to_template()), 0);
    if (c.baselines.no_feedback) {
      TopologyTemplate open_loop = c.network.to_template();
      open_loop.feedback_amplitude = 0.0;
      run_filtered("no_feedback", build_topology(open_loop), 1000);
    }
  }

  if (!want_raw) return;
  Timer raw_timer;
  const std::vector<ElectricalWaveform> es_raw =
      detect_outputs(c, {chan->wave}, local, 2000);
  const DecisionSamples ds_raw =
      sample_outputs(c, es_raw, y_full, win, train_start, score_rows);
  const double raw_wall = raw_timer.elapsed();

  if (c.baselines.ffe) {
    Timer timer;
    const FeatureMatrix f = assemble_features(ds_raw, win);
    const EvalResult ev =
        evaluate_features(f, y_full, &chan->stream.symbols, fmt,
                          c.readout.lambda, train_start, n_train, n_test);
    const double wall = raw_wall + timer.elapsed();
    add_record(recs, point, params, "ffe", "ber", ev.ber, ev.n_test, wall,
               deterministic);
    add_record(recs, point, params, "ffe", "ser", ev.ser, ev.n_test, wall,
               deterministic);
  }
  if (c.baselines.volterra_k1 > 0) {
    Timer timer;
    const VolterraSpec vs{c.baselines.volterra_k1, c.baselines.volterra_k2,
                          c.baselines.volterra_k3};
    const FeatureMatrix f = volterra_features(ds_raw.outputs[0], vs);
    // Fixed mild ridge: the lambda grid is prohibitive at kernel widths.
    const double lam = 1e-4 * static_cast<double>(f.x.cols());
    const EvalResult ev = evaluate_features(f, y_full, &chan->stream.symbols,
                                            fmt, lam, train_start, n_train,
                                            n_test);
    const double wall = raw_wall + timer.elapsed();
    add_record(recs, point, params, "volterra", "ber", ev.ber, ev.n_test, wall,
               deterministic);
    add_record(recs, point, params, "volterra", "ser", ev.ser, ev.n_test, wall,
               deterministic);
    add_record(recs, point, params, "volterra", "multiplications",
               static_cast<double>(volterra_multiplications(vs)), 1, 0.0,
               deterministic);
  }
  if (c.baselines.mlse_taps > 0) {
    Timer timer;
    const EvalResult ev =
        evaluate_mlse(ds_raw.outputs[0], chan->stream.symbols, fmt,
                      c.baselines.mlse_taps, train_start, n_train, n_test);
    const double wall = raw_wall + timer.elapsed();
    add_record(recs, point, params, "mlse", "ber", ev.ber, ev.n_test, wall,
               deterministic);
    add_record(recs, point, params, "mlse", "ser", ev.ser, ev.n_test, wall,
               deterministic);
  }
}

void run_narma(const ExperimentConfig& c, std::uint64_t seed,
               std::uint64_t local, std::size_t point,
               const std::string& params, std::vector<Record>& recs,
               bool deterministic) {
  if (c.modulation.format_enum() != ModFormat::analog)
    throw std::invalid_argument("narma needs modulation.format = \"analog\"");
  const NarmaSequence seq =
      narma10_with_guard(static_cast<std::size_t>(c.symbols),
                         derive_seed(seed, "narma"));

  const auto chan = build_channel(c, seed, seq.u);
  const long nsym = c.symbols;
  Eigen::MatrixXd y_full(nsym, 1);
  for (long n = 0; n < nsym; ++n)
    y_full(n, 0) = n + 1 < nsym ? seq.y[n + 1] : seq.y.back();

  const TapWindow win = c.readout.taps_pre >= 0
                            ? TapWindow{c.readout.taps_pre,
                                        std::max(c.readout.taps_post, 0)}
                            : TapWindow{9, 0};
  const long train_start = win.pre + c.narma.washout;
  const long n_train = c.narma.train;
  const long n_test = c.narma.test;
  if (train_start + n_train + n_test + win.post + 1 > nsym)
    throw std::invalid_argument("narma needs washout + train + test + window "
                                "+ 1 <= symbols");
  const long score_rows = std::min<long>(n_train, 1536);

  auto evaluate_topology = [&](const NetworkTopology& topo,
                               std::uint64_t salt) {
    const std::vector<SampledWaveform> outs = process(chan->wave, topo);
    const std::vector<ElectricalWaveform> es =
        detect_outputs(c, outs, local, salt);
    const DecisionSamples ds =
        sample_outputs(c, es, y_full, win, train_start, score_rows);
    const FeatureMatrix f = assemble_features(ds, win);
    return evaluate_features(f, y_full, nullptr, ModFormat::analog,
                             c.readout.lambda, train_start, n_train, n_test);
  };

  if (!c.network.enabled)
    throw std::invalid_argument("narma needs the network enabled");
  const NetworkTopology topo = build_topology(c.network.to_template());
  {
    Timer timer;
    const EvalResult ev = evaluate_topology(topo, 0);
    add_record(recs, point, params, "ross", "nmse", ev.nmse, ev.n_test,
               timer.elapsed(), deterministic);
  }

  if (c.perturb.instances > 0) {
    double sum = 0.0, worst = 0.0;
    for (int i = 0; i < c.perturb.instances; ++i) {
      Timer timer;
      PerturbationSpec ps;
      ps.relative_jitter = c.perturb.relative_jitter;
      ps.n_eff_std = c.perturb.n_eff_std;
      ps.carrier_hz = c.laser.carrier_hz();
      ps.seed = derive_seed(seed, "perturb", static_cast<std::uint64_t>(i));
      const PerturbedTopology pt = perturb_topology(topo, ps);
      const EvalResult ev = evaluate_topology(
          pt.topology, 10000 + static_cast<std::uint64_t>(i) * 100);
      sum += ev.nmse;
      worst = std::max(worst, ev.nmse);
      add_record(recs, point,
                 join_params(params, "instance=" + std::to_string(i)),
                 "perturbed", "nmse", ev.nmse, ev.n_test, timer.elapsed(),
                 deterministic);
    }
    const auto n = static_cast<std::size_t>(c.perturb.instances);
    add_record(recs, point, params, "perturbed_mean", "nmse",
               sum / static_cast<double>(n), n, 0.0, deterministic);
    add_record(recs, point, params, "perturbed_max", "nmse", worst, n, 0.0,
               deterministic);
  }
}

void run_memcap(const ExperimentConfig& c, std::uint64_t seed,
                std::uint64_t local, std::size_t point,
                const std::string& params, std::vector<Record>& recs,
                bool deterministic) {
  if (c.modulation.format_enum() != ModFormat::analog)
    throw std::invalid_argument("memcap needs modulation.format = \"analog\"");
  if (!c.network.enabled)
    throw std::invalid_argument("memcap needs the network enabled");
  const MemcapConfig& mc = c.memcap;
  const auto n_det = mc.detuning_grid_ghz.size();
  const auto n_rep = static_cast<std::size_t>(mc.repeats);

  for (std::size_t a = 0; a < mc.feedback_grid.size(); ++a) {
    double best_mean = -1.0;
    for (std::size_t d = 0; d < n_det; ++d) {
      double sum = 0.0;
      for (std::size_t r = 0; r < n_rep; ++r) {
        Timer timer;
        const std::uint64_t idx = (a * n_det + d) * n_rep + r;
        ExperimentConfig ci = c;
        ci.network.feedback = mc.feedback_grid[a];
        ci.network.bank_offsets_ghz.clear();
        ci.network.bank_spacing_ghz = mc.detuning_grid_ghz[d];

        std::vector<double> drive(static_cast<std::size_t>(c.symbols));
        Rng rng(derive_seed(seed, "memcap-input", r));
        for (double& v : drive) v = rng.uniform01();

        const auto chan = build_channel(ci, seed, std::move(drive));
        Eigen::MatrixXd y_full(c.symbols, 1);
        for (long n = 0; n < c.symbols; ++n) y_full(n, 0) = chan->drive[n];

        const NetworkTopology topo = build_topology(ci.network.to_template());
        const std::vector<SampledWaveform> outs = process(chan->wave, topo);
        const std::vector<ElectricalWaveform> es =
            detect_outputs(ci, outs, local, idx * 1000);
        const DecisionSamples ds =
            sample_outputs(ci, es, y_full, TapWindow{0, 0}, mc.i_max,
                           std::min<long>(mc.train, 2048));
        const std::vector<double> mf = memory_function(
            ds, chan->drive, static_cast<std::size_t>(mc.i_max),
            static_cast<std::size_t>(mc.train));
        const double cap = memory_capacity(mf);
        sum += cap;
        const std::string p = join_params(
            params, "feedback=" + fmt_double(mc.feedback_grid[a]) +
                        ";detuning_ghz=" + fmt_double(mc.detuning_grid_ghz[d]) +
                        ";repeat=" + std::to_string(r));
        add_record(recs, point, p, "ross", "mc", cap,
                   static_cast<std::size_t>(c.symbols - mc.i_max - mc.train),
                   timer.elapsed(), deterministic);
      }
      const double mean = sum / static_cast<double>(n_rep);
      best_mean = std::max(best_mean, mean);
      add_record(recs, point,
                 join_params(params,
                             "feedback=" + fmt_double(mc.feedback_grid[a]) +
                                 ";detuning_ghz=" +
                                 fmt_double(mc.detuning_grid_ghz[d])),
                 "ross", "mc_mean", mean, n_rep, 0.0, deterministic);
    }
    add_record(recs, point,
               join_params(params,
                           "feedback=" + fmt_double(mc.feedback_grid[a])),
               "ross", "mc_max", best_mean, n_rep * n_det, 0.0, deterministic);
  }
}

void run_fading(const ExperimentConfig& c, std::uint64_t seed,
                std::uint64_t /*local*/, std::size_t point,
                const std::string& params, std::vector<Record>& recs,
                bool deterministic) {
  if (c.link.spans.empty())
    throw std::invalid_argument("fading needs at least one fiber span");
  Timer timer;
  const FiberSpec fiber = to_fiber(c.link.spans[0], c.laser.wavelength_nm);
  const FadingProfile prof =
      fading_profile(fiber, c.fading.max_freq_ghz * 1e9,
                     derive_seed(seed, "fading"),
                     static_cast<std::size_t>(c.fading.n_tones));
  std::vector<double> analytic = fading_null_frequencies(fiber, 16);
  analytic.erase(std::remove_if(analytic.begin(), analytic.end(),
                                [&](double f) {
                                  return f > c.fading.max_freq_ghz * 1e9;
                                }),
                 analytic.end());
  const std::vector<double> measured =
      find_profile_minima(prof, static_cast<int>(analytic.size()));
  const double wall = timer.elapsed();
  const auto samples = static_cast<std::size_t>(c.fading.n_tones);
  for (std::size_t k = 0; k < measured.size(); ++k)
    add_record(recs, point,
               join_params(params, "null=" + std::to_string(k)), "measured",
               "null_freq_hz", measured[k], samples, wall, deterministic);
  for (std::size_t k = 0; k < analytic.size(); ++k)
    add_record(recs, point,
               join_params(params, "null=" + std::to_string(k)), "analytic",
               "null_freq_hz", analytic[k], samples, 0.0, deterministic);
  add_record(recs, point, params, "measured", "null_count",
             static_cast<double>(measured.size()), samples, wall,
             deterministic);
}

void run_point(const ExperimentConfig& c, std::uint64_t seed,
               std::size_t point, const std::string& params,
               std::vector<Record>& recs, bool deterministic) {
  const std::uint64_t local = derive_seed(seed, "point", point);
  switch (c.task) {
    case Task::narma:
      run_narma(c, seed, local, point, params, recs, deterministic);
      return;
    case Task::equalize:
    case Task::scan:  // scan keeps the base task's semantics per point
      run_equalize(c, seed, local, point, params, recs, deterministic);
      return;
    case Task::memcap:
      run_memcap(c, seed, local, point, params, recs, deterministic);
      return;
    case Task::fading:
      run_fading(c, seed, local, point, params, recs, deterministic);
      return;
  }
  throw std::logic_error("unhandled task");
}

void set_path(ordered_json& j, const std::string& path, double v) {
  ordered_json* cur = &j;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = path.find('.', pos);
    const std::string key =
        path.substr(pos, dot == std::string::npos ? std::string::npos
                                                  : dot - pos);
    ordered_json* next = nullptr;
    if (cur->is_array()) {
      try {
        const std::size_t idx = std::stoul(key);
        if (idx >= cur->size()) throw std::out_of_range("index");
        next = &(*cur)[idx];
      } catch (const std::exception&) {
        throw std::invalid_argument("sweep path \"" + path +
                                    "\" has a bad array index \"" + key + "\"");
      }
    } else if (cur->is_object() && cur->contains(key)) {
      next = &(*cur)[key];
    } else {
      throw std::invalid_argument("sweep path \"" + path +
                                  "\" does not name an existing config key");
    }
    if (dot == std::string::npos) {
      if (next->is_number_integer())
        *next = static_cast<long long>(std::llround(v));
      else if (next->is_number())
        *next = v;
      else
        throw std::invalid_argument("sweep path \"" + path +
                                    "\" must point at a number");
      return;
    }
    cur = next;
    pos = dot + 1;
  }
}

std::string sanitize_csv(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& c, std::uint64_t seed,
                         int workers, bool deterministic) {
  RunResult rr;
  rr.resolved = resolved_config(c);
  rr.config_hash = fnv1a(rr.resolved.dump());
  if (c.task == Task::scan && c.sweep.empty())
    throw std::invalid_argument("scan needs at least one sweep axis");

  std::vector<std::size_t> sizes;
  std::size_t total = 1;
  for (const SweepAxis& a : c.sweep) {
    sizes.push_back(a.values.size());
    total *= a.values.size();
  }
  if (c.sweep.empty()) total = 1;

  std::vector<std::vector<Record>> per_point(total);
  std::atomic<std::size_t> cursor{0};
  auto work = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= total) return;
      std::string params;
      try {
        ExperimentConfig ci = c;
        if (!c.sweep.empty()) {
          ordered_json cj = rr.resolved;
          std::size_t rem = i;
          for (std::size_t ax = 0; ax < c.sweep.size(); ++ax) {
            const double v = c.sweep[ax].values[rem % sizes[ax]];
            rem /= sizes[ax];
            set_path(cj, c.sweep[ax].path, v);
            params = join_params(params, c.sweep[ax].path + "=" +
                                             fmt_double(v));
          }
          cj.erase("sweep");
          ci = parse_config(cj);
        }
        run_point(ci, seed, i, params, per_point[i], deterministic);
      } catch (const std::exception& e) {
        Record r;
        r.point = i;
        r.params = join_params(params,
                               std::string("reason=") + sanitize_csv(e.what()));
        r.variant = "error";
        r.metric = "error";
        r.value = 1.0;
        per_point[i] = {std::move(r)};
      }
    }
  };

  const int nw = std::max(
      1, std::min<int>(workers, static_cast<int>(total)));
  if (nw <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nw) - 1);
    for (int t = 1; t < nw; ++t) pool.emplace_back(work);
    work();
    for (std::thread& t : pool) t.join();
  }
  for (auto& v : per_point)
    for (Record& r : v) rr.records.push_back(std::move(r));

  for (const AssertionConfig& a : c.assertions) {
    bool matched = false;
    for (const Record& r : rr.records) {
      if (r.metric != a.metric) continue;
      if (!a.variant.empty() && r.variant != a.variant) continue;
      matched = true;
      if (!std::isnan(a.max) && r.value > a.max)
        rr.assertion_failures.push_back(
            a.metric + " (" + r.variant + (r.params.empty() ? "" : ", " +
            r.params) + ") = " + fmt_double(r.value) + " exceeds max " +
            fmt_double(a.max));
      if (!std::isnan(a.min) && r.value < a.min)
        rr.assertion_failures.push_back(
            a.metric + " (" + r.variant + (r.params.empty() ? "" : ", " +
            r.params) + ") = " + fmt_double(r.value) + " is below min " +
            fmt_double(a.min));
    }
    if (!matched)
      rr.assertion_failures.push_back("assertion on \"" + a.metric +
                                      "\" matched no records");
  }
  return rr;
}

std::string results_csv(const RunResult& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(r.config_hash));
  const std::string hash = buf;
  const std::string task = r.resolved.at("task").get<std::string>();
  std::string out =
      "config_hash,task,point,variant,metric,params,value,samples,"
      "wall_time_s\n";
  for (const Record& rec : r.records) {
    out += hash;
    out += ',';
    out += task;
    out += ',';
    out += std::to_string(rec.point);
    out += ',';
    out += sanitize_csv(rec.variant);
    out += ',';
    out += sanitize_csv(rec.metric);
    out += ',';
    out += sanitize_csv(rec.params);
    out += ',';
    std::snprintf(buf, sizeof buf, "%.17g", rec.value);
    out += buf;
    out += ',';
    out += std::to_string(rec.samples);
    out += ',';
    std::snprintf(buf, sizeof buf, "%.17g", rec.wall_time_s);
    out += buf;
    out += '\n';
  }
  return out;
}

ordered_json default_config(Task t) {
  ExperimentConfig c;
  c.task = t;
  switch (t) {
    case Task::equalize:
    case Task::scan: {
      // 112 GBd PAM-4 over 40 km of O-band fiber, two slicer nodes. The
      // slices partially overlap near the carrier; mirrored offsets would
      // give conjugate fields and identical photocurrents.
      c.symbols = 65536;
      c.modulation.format = "pam4";
      c.modulation.baud_gbd = 112.0;
      c.modulation.oversampling = 8;
      c.modulation.mzm_bandwidth_ghz = 60.0;
      c.laser.power_dbm = 3.0;
      c.laser.linewidth_khz = 100.0;
      c.laser.wavelength_nm = 1310.0;
      c.link.spans = {SpanConfig{40.0, 3.0, 0.35, 1.3, 0.0, 50.0}};
      c.link.launch_power_dbm = 4.0;
      c.link.preamp_gain_db = 26.0;
      c.network.kind = "mzdi";
      c.network.n_banks = 2;
      c.network.n_filters = 1;
      c.network.bandwidth_ghz = 25.0;
      c.network.bank_offsets_ghz = {-4.0, 2.0};
      c.network.input_coupling = 0.7;
      c.network.output_coupling = 0.7;
      c.network.feedback = 1.0;
      c.network.loop_delay_ps = 54.0;
      c.network.loop_phase_rad = M_PI;
      c.receiver.adc_bits = 8;
      c.readout.taps_pre = 13;
      c.readout.taps_post = 17;
      c.readout.train_symbols = 20000;
      c.readout.guard_symbols = 256;
      c.baselines.no_feedback = true;
      c.baselines.ffe = true;
      if (t == Task::scan) {
        c.sweep = {SweepAxis{"network.bank_offsets_ghz.1",
                             {0.0, 2.0, 4.0, 6.0}},
                   SweepAxis{"network.bandwidth_ghz",
                             {20.0, 25.0, 30.0, 35.0}}};
      } else {
        c.assertions = {AssertionConfig{"ber", "ross", kNan, 3.8e-3}};
      }
      break;
    }
    case Task::narma: {
      // Analog 40 GBd drive into 3 banks of 4 microrings; the loop delay
      // spans 9 symbols, matching the series' deepest input product.
      c.symbols = 4096;
      c.modulation.format = "analog";
      c.modulation.baud_gbd = 40.0;
      c.modulation.oversampling = 8;
      c.modulation.mzm_bandwidth_ghz = 35.0;
      c.modulation.extinction_ratio_db = 13.0;
      c.modulation.analog_full_scale = 0.5;
      c.laser.power_dbm = 12.0;
      c.laser.wavelength_nm = 1550.0;
      c.link.preamp_gain_db = 10.0;
      c.network.kind = "mrr";
      c.network.n_banks = 3;
      c.network.n_filters = 4;
      c.network.bandwidth_ghz = 30.0;
      c.network.auto_span = true;
      c.network.span_ghz = 60.0;
      c.network.input_coupling = 0.3;
      c.network.output_coupling = 0.3;
      c.network.feedback = 0.95;
      c.network.loop_delay_ps = 225.0;
      c.network.loop_phase_rad = M_PI;
      c.network.per_filter_loops = true;
      c.network.link_delay_ps = 2.5;
      c.network.link_transmission = 0.95;
      c.receiver.adc_bits = 12;
      c.readout.taps_pre = 9;
      c.readout.taps_post = 0;
      c.readout.train_symbols = 2000;
      c.readout.guard_symbols = 0;
      c.narma = NarmaConfig{86, 2000, 2000};
      c.assertions = {AssertionConfig{"nmse", "ross", kNan, 0.12}};
      break;
    }
    case Task::memcap: {
      // Broadband analog drive so the detuning ladder actually slices;
      // the 4-symbol loop stretches recall without losing monotonicity.
      c.symbols = 4096;
      c.modulation.format = "analog";
      c.modulation.baud_gbd = 40.0;
      c.modulation.oversampling = 8;
      c.modulation.mzm_bandwidth_ghz = 35.0;
      c.modulation.analog_full_scale = 1.0;
      c.laser.power_dbm = 0.0;
      c.laser.wavelength_nm = 1550.0;
      c.link.preamp_gain_db = 10.0;
      c.network.kind = "mzdi";
      c.network.n_banks = 4;
      c.network.n_filters = 1;
      c.network.bandwidth_ghz = 30.0;
      c.network.loop_delay_ps = 100.0;
      c.network.loop_phase_rad = M_PI;
      c.receiver.adc_bits = 12;
      c.readout.train_symbols = 2800;
      c.readout.guard_symbols = 0;
      c.memcap.repeats = 5;
      break;
    }
    case Task::fading: {
      c.symbols = 32768;
      c.laser.wavelength_nm = 1550.0;
      c.link.spans = {SpanConfig{20.0, 17.0, 0.2, 1.3, 0.0, 50.0}};
      c.network.enabled = false;
      break;
    }
  }
  return resolved_config(c);
}

}  // namespace ross
