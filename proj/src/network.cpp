#include "ross/network.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "ross/rng.hpp"

namespace ross {

namespace {

double filter_center(const FilterSpec& f) {
  return std::visit([](const auto& s) { return s.center_hz; }, f);
}

void set_filter_center(FilterSpec& f, double hz) {
  std::visit([hz](auto& s) { s.center_hz = hz; }, f);
}

double filter_n_eff(const FilterSpec& f) {
  if (const auto* mrr = std::get_if<MrrSpec>(&f)) return mrr->n_eff;
  return 2.6;
}

/// Solve the symmetric coupler transmission that gives the requested drop
/// linewidth: fwhm = fsr (1 - t^2 rho) / (pi t sqrt(rho)).
double mrr_t_for_linewidth(double fwhm_hz, double fsr_hz, double rho) {
  const double q = M_PI * fwhm_hz / fsr_hz;
  const double t_sqrt_rho = (-q + std::sqrt(q * q + 4.0)) / 2.0;
  const double t = t_sqrt_rho / std::sqrt(rho);
  if (t <= 0.0 || t >= 1.0) {
    throw std::invalid_argument(
        "requested ring bandwidth unreachable: solved transmission " +
        std::to_string(t));
  }
  return t;
}

struct BankEval {
  std::vector<FrequencyResponse> chain;
  std::vector<FrequencyResponse> drop;
  std::vector<double> link_phase;
  double link_delay = 0.0;
  double link_transmission = 1.0;
  double front = 1.0;   // splitter * sqrt(1-a) sqrt(1-b)
  double beta = 0.0;    // sqrt(a b) * L_fb
  double loop_delay = 0.0;
  double loop_phase = 0.0;
  bool per_filter_loops = false;
  double pf_front = 1.0;  // per-filter mode: sqrt(1-a) sqrt(1-b) per node

  cplx link_factor(double f, std::size_t i) const {
    double ph = -2.0 * M_PI * f * link_delay - link_phase[i];
    return link_transmission * cplx{std::cos(ph), std::sin(ph)};
  }

  cplx output(double f, std::size_t j) const {
    if (per_filter_loops) {
      cplx pre{1.0, 0.0};
      for (std::size_t i = 0; i < j; ++i) {
        pre *= node_wrap(f, chain[i](f)) * link_factor(f, i);
      }
      return pre * node_wrap(f, drop[j](f));
    }
    cplx pre{1.0, 0.0};
    cplx cascade{1.0, 0.0};
    for (std::size_t i = 0; i < chain.size(); ++i) {
      if (i == j) pre = cascade;
      cascade *= chain[i](f);
      if (i + 1 < chain.size()) cascade *= link_factor(f, i);
    }
    if (j == 0) pre = cplx{1.0, 0.0};
    double lph = -(2.0 * M_PI * f * loop_delay + loop_phase);
    cplx loop = beta * cascade * cplx{std::cos(lph), std::sin(lph)};
    return front * pre * drop[j](f) / (1.0 + loop);
  }

  cplx node_wrap(double f, cplx h) const {
    double lph = -(2.0 * M_PI * f * loop_delay + loop_phase);
    cplx loop = beta * h * cplx{std::cos(lph), std::sin(lph)};
    return pf_front * h / (1.0 + loop);
  }
};

}  // namespace

FrequencyResponse slot_output_response(const FilterSpec& f) {
  if (const auto* mzdi = std::get_if<MzdiSpec>(&f)) {
    return mzdi_response(*mzdi);
  }
  return mrr_response(std::get<MrrSpec>(f), MrrPort::drop);
}

FrequencyResponse slot_chain_response(const FilterSpec& f) {
  if (const auto* mzdi = std::get_if<MzdiSpec>(&f)) {
    // the tapped port also recirculates (single-filter loop wiring)
    return mzdi_response(*mzdi);
  }
  return mrr_response(std::get<MrrSpec>(f), MrrPort::through);
}

NetworkTopology build_topology(const TopologyTemplate& t) {
  if (t.n_banks < 1 || t.n_filters < 1) {
    throw std::invalid_argument("need at least one bank and one filter");
  }
  if (!t.bank_offsets_hz.empty() &&
      t.bank_offsets_hz.size() != static_cast<std::size_t>(t.n_banks)) {
    throw std::invalid_argument("bank_offsets_hz size != n_banks");
  }
  const int total = t.n_banks * t.n_filters;

  auto center_of = [&](int bank, int j) {
    if (t.auto_span) {
      if (total == 1) return t.center_hz;
      double step = t.span_hz / (total - 1);
      return t.center_hz - t.span_hz / 2.0 +
             (bank * t.n_filters + j) * step;
    }
    double bank_center =
        t.bank_offsets_hz.empty()
            ? t.center_hz + bank * t.bank_spacing_hz
            : t.center_hz + t.bank_offsets_hz[bank];
    return bank_center + j * t.filter_spacing_hz;
  };

  NetworkTopology topo;
  topo.per_filter_loops = t.per_filter_loops;
  for (int b = 0; b < t.n_banks; ++b) {
    BankSpec bank;
    bank.link_delay_s = t.link_delay_s;
    bank.link_transmission = t.link_transmission;
    bank.input_coupling = t.input_coupling;
    bank.output_coupling = t.output_coupling;
    bank.feedback_amplitude = t.feedback_amplitude;
    bank.loop_delay_s = t.loop_delay_s;
    bank.loop_phase_rad = t.loop_phase_rad;
    bank.link_phase_rad.assign(std::max(0, t.n_filters - 1), 0.0);
    for (int j = 0; j < t.n_filters; ++j) {
      double c = center_of(b, j);
      if (t.kind == FilterKind::mzdi) {
        bank.filters.push_back(
            MzdiSpec{c, mzdi_delay_for_bandwidth(t.bandwidth_hz)});
      } else {
        double coupling = t.mrr_coupling;
        MrrSpec probe = MrrSpec::from_geometry(
            t.mrr_radius_m, t.mrr_loss_db_cm, 0.5, t.n_eff, c);
        if (coupling <= 0.0) {
          double rho =
              std::exp(-probe.loss_per_m * probe.circumference_m / 2.0);
          double tt =
              mrr_t_for_linewidth(t.bandwidth_hz, probe.fsr_hz(), rho);
          coupling = std::sqrt(1.0 - tt * tt);
        }
        bank.filters.push_back(MrrSpec::from_geometry(
            t.mrr_radius_m, t.mrr_loss_db_cm, coupling, t.n_eff, c));
      }
    }
    topo.banks.push_back(std::move(bank));
  }
  return topo;
}

std::vector<FrequencyResponse> network_responses(const NetworkTopology& t) {
  if (t.banks.empty()) throw std::invalid_argument("topology has no banks");
  const double split = 1.0 / std::sqrt(static_cast<double>(t.banks.size()));
  std::vector<FrequencyResponse> out;
  for (const BankSpec& bank : t.banks) {
    const std::size_t nf = bank.filters.size();
    if (nf == 0) throw std::invalid_argument("bank has no filters");
    if (bank.input_coupling <= 0.0 || bank.input_coupling >= 1.0 ||
        bank.output_coupling <= 0.0 || bank.output_coupling >= 1.0) {
      throw std::invalid_argument("bank couplings must lie in (0, 1)");
    }
    if (bank.link_transmission <= 0.0 || bank.link_transmission > 1.0) {
      throw std::invalid_argument("link transmission must lie in (0, 1]");
    }
    auto ev = std::make_shared<BankEval>();
    double chain_sup = 1.0;
    for (const FilterSpec& f : bank.filters) {
      ev->chain.push_back(slot_chain_response(f));
      ev->drop.push_back(slot_output_response(f));
      chain_sup *= ev->chain.back().sup_gain();
    }
    ev->link_phase = bank.link_phase_rad;
    ev->link_phase.resize(nf > 0 ? nf - 1 : 0, 0.0);
    ev->link_delay = bank.link_delay_s;
    ev->link_transmission = bank.link_transmission;
    for (std::size_t i = 0; i + 1 < nf; ++i) {
      chain_sup *= bank.link_transmission;
    }
    const double beta =
        std::sqrt(bank.input_coupling * bank.output_coupling) *
        bank.feedback_amplitude;
    const double gain =
        t.per_filter_loops ? beta * 1.0 : beta * chain_sup;
    if (gain >= 1.0) {
      throw std::invalid_argument(
          "bank loop unstable: sqrt(a*b)*L_fb*sup|C| = " +
          std::to_string(gain) + " >= 1");
    }
    const double cpl = std::sqrt(1.0 - bank.input_coupling) *
                       std::sqrt(1.0 - bank.output_coupling);
    ev->front = split * cpl;
    ev->pf_front = cpl;
    ev->beta = beta;
    ev->loop_delay = bank.loop_delay_s;
    ev->loop_phase = bank.loop_phase_rad;
    ev->per_filter_loops = t.per_filter_loops;

    for (std::size_t j = 0; j < nf; ++j) {
      const FrequencyResponse& dropj = ev->drop[j];
      double sup = ev->front * dropj.sup_gain() / (1.0 - gain);
      if (t.per_filter_loops) {
        // splitter amplitude is part of the first node's prefactor
        sup = split * std::pow(cpl / (1.0 - gain), double(j + 1));
      }
      auto eval = [ev, j, split](double f) {
        cplx v = ev->output(f, j);
        return ev->per_filter_loops ? split * v : v;
      };
      out.emplace_back(eval, dropj.center_hz(), dropj.bandwidth_3db_hz(),
                       sup);
    }
  }
  return out;
}

std::vector<SampledWaveform> process(const SampledWaveform& w,
                                     const NetworkTopology& t) {
  const double half = w.sample_rate / 2.0;
  for (const BankSpec& bank : t.banks) {
    for (const FilterSpec& f : bank.filters) {
      double c = filter_center(f);
      if (std::abs(c - w.center_offset) > half) {
        throw std::invalid_argument(
            "filter center " + std::to_string(c * 1e-9) +
            " GHz lies outside the waveform grid (+-" +
            std::to_string(half * 1e-9) + " GHz)");
      }
    }
  }
  std::vector<SampledWaveform> outs;
  for (const FrequencyResponse& h : network_responses(t)) {
    outs.push_back(apply_response(w, h));
  }
  return outs;
}

PerturbedTopology perturb_topology(const NetworkTopology& t,
                                   const PerturbationSpec& p) {
  if (p.relative_jitter < 0.0) {
    throw std::invalid_argument("relative jitter must be >= 0");
  }
  Rng rng(p.seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    NetworkTopology out = t;
    for (BankSpec& bank : out.banks) {
      for (FilterSpec& f : bank.filters) {
        double u = rng.uniform(-p.relative_jitter, p.relative_jitter);
        set_filter_center(f, filter_center(f) * (1.0 + u));
      }
      double ut = rng.uniform(-p.relative_jitter, p.relative_jitter);
      bank.link_transmission =
          std::min(1.0, bank.link_transmission * (1.0 + ut));
      bank.link_phase_rad.resize(
          bank.filters.empty() ? 0 : bank.filters.size() - 1, 0.0);
      for (std::size_t i = 0; i < bank.link_phase_rad.size(); ++i) {
        double dn = rng.normal(0.0, p.n_eff_std);
        double n_eff = filter_n_eff(bank.filters[i]);
        bank.link_phase_rad[i] +=
            2.0 * M_PI * p.carrier_hz * bank.link_delay_s * dn / n_eff;
      }
    }
    try {
      network_responses(out);
    } catch (const std::invalid_argument&) {
      continue;  // unstable draw, resample
    }
    return {std::move(out), attempt};
  }
  throw std::runtime_error(
      "no stable perturbed topology found in 100 draws");
}

}  // namespace ross
