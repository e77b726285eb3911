#include "ross/filters.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ross {

namespace {
constexpr double kLightSpeed = 299792458.0;  // m/s

cplx unit_phasor(double phase_rad) {
  return {std::cos(phase_rad), std::sin(phase_rad)};
}
}  // namespace

FrequencyResponse mzdi_response(const MzdiSpec& spec) {
  if (spec.delay_s <= 0.0) {
    throw std::invalid_argument("mzdi arm delay must be positive, got " +
                                std::to_string(spec.delay_s));
  }
  const double f0 = spec.center_hz;
  const double dt = spec.delay_s;
  auto eval = [f0, dt](double f) {
    return 0.5 * (1.0 + unit_phasor(-2.0 * M_PI * (f - f0) * dt));
  };
  return FrequencyResponse(eval, f0, 1.0 / (2.0 * dt), 1.0);
}

MrrSpec MrrSpec::from_geometry(double radius_m, double loss_db_per_cm,
                               double coupling, double n_eff,
                               double center_hz) {
  if (coupling <= 0.0 || coupling >= 1.0) {
    throw std::invalid_argument("ring coupling must lie in (0, 1), got " +
                                std::to_string(coupling));
  }
  MrrSpec s;
  s.k1 = s.k2 = coupling;
  s.t1 = s.t2 = std::sqrt(1.0 - coupling * coupling);
  s.loss_per_m = loss_db_per_cm * 100.0 * std::log(10.0) / 10.0;
  s.circumference_m = 2.0 * M_PI * radius_m;
  s.n_eff = n_eff;
  s.center_hz = center_hz;
  return s;
}

double MrrSpec::fsr_hz() const {
  return kLightSpeed / (n_eff * circumference_m);
}

double MrrSpec::linewidth_hz() const {
  const double rho = std::exp(-loss_per_m * circumference_m / 2.0);
  const double tt = t1 * t2 * rho;
  return fsr_hz() * (1.0 - tt) / (M_PI * std::sqrt(tt));
}

FrequencyResponse mrr_response(const MrrSpec& spec, MrrPort port) {
  if (spec.circumference_m <= 0.0 || spec.n_eff <= 0.0) {
    throw std::invalid_argument("ring geometry not set");
  }
  if (spec.t1 * spec.t2 >=
      std::exp(spec.loss_per_m * spec.circumference_m / 2.0)) {
    // cannot happen for passive t < 1, guards nonsense input
    throw std::invalid_argument("ring transmission t1*t2 >= round-trip gain");
  }
  const double half_loss = spec.loss_per_m * spec.circumference_m / 2.0;
  const double tau = spec.circumference_m * spec.n_eff / kLightSpeed;
  const double f0 = spec.center_hz;
  const double t1 = spec.t1, t2 = spec.t2, k1 = spec.k1, k2 = spec.k2;
  std::function<cplx(double)> eval;
  if (port == MrrPort::through) {
    eval = [=](double f) {
      cplx ephi = std::exp(-half_loss) * unit_phasor(-2.0 * M_PI * (f - f0) * tau);
      return (t1 - t2 * ephi) / (1.0 - t1 * t2 * ephi);
    };
  } else {
    eval = [=](double f) {
      cplx ephi = std::exp(-half_loss) * unit_phasor(-2.0 * M_PI * (f - f0) * tau);
      return -k1 * k2 * ephi / (1.0 - t1 * t2 * ephi);
    };
  }
  return FrequencyResponse(std::move(eval), f0, spec.linewidth_hz(), 1.0);
}

FrequencyResponse butterworth_response(const ButterworthSpec& spec) {
  if (spec.order < 1 || spec.order > 10) {
    throw std::invalid_argument("butterworth order out of range: " +
                                std::to_string(spec.order));
  }
  if (spec.cutoff_hz <= 0.0) {
    throw std::invalid_argument("butterworth cutoff must be positive");
  }
  const int n = spec.order;
  std::vector<cplx> poles(n);
  for (int k = 0; k < n; ++k) {
    double ang = M_PI * (2.0 * k + n + 1.0) / (2.0 * n);
    poles[k] = unit_phasor(ang);
  }
  const double fc = spec.cutoff_hz;
  const double f0 = spec.center_hz;
  auto eval = [poles, fc, f0](double f) {
    cplx s{0.0, (f - f0) / fc};
    cplx num{1.0, 0.0}, den{1.0, 0.0};
    for (const cplx& p : poles) {
      num *= -p;
      den *= s - p;
    }
    return num / den;
  };
  return FrequencyResponse(eval, f0, 2.0 * fc, 1.0);
}

double node_loop_gain(const RecurrentNodeSpec& spec) {
  return std::sqrt(spec.input_coupling * spec.output_coupling) *
         spec.feedback_amplitude * spec.inner.sup_gain();
}

FrequencyResponse node_response(const RecurrentNodeSpec& spec) {
  if (spec.input_coupling <= 0.0 || spec.input_coupling >= 1.0 ||
      spec.output_coupling <= 0.0 || spec.output_coupling >= 1.0) {
    throw std::invalid_argument("node couplings must lie in (0, 1)");
  }
  if (spec.feedback_amplitude < 0.0 || spec.feedback_amplitude > 1.0) {
    throw std::invalid_argument("feedback amplitude must lie in [0, 1]");
  }
  const double gain = node_loop_gain(spec);
  if (gain >= 1.0) {
    throw std::invalid_argument(
        "recurrent loop unstable: sqrt(a*b)*L_fb*sup|H| = " +
        std::to_string(gain) + " >= 1");
  }
  const double front =
      std::sqrt(1.0 - spec.input_coupling) * std::sqrt(1.0 - spec.output_coupling);
  const double beta = std::sqrt(spec.input_coupling * spec.output_coupling) *
                      spec.feedback_amplitude;
  const double td = spec.loop_delay_s;
  const double phi = spec.loop_phase_rad;
  FrequencyResponse inner = spec.inner;
  auto eval = [front, beta, td, phi, inner](double f) {
    cplx h = inner(f);
    cplx loop = beta * h * unit_phasor(-(2.0 * M_PI * f * td + phi));
    return front * h / (1.0 + loop);
  };
  const double sup =
      front * inner.sup_gain() / (1.0 - gain);
  return FrequencyResponse(eval, inner.center_hz(), inner.bandwidth_3db_hz(),
                           sup);
}

SampledWaveform node_impulse_response(const RecurrentNodeSpec& spec,
                                      double duration_s,
                                      double sample_rate_hz) {
  std::size_t n = 1;
  while (static_cast<double>(n) < duration_s * sample_rate_hz) n <<= 1;
  SampledWaveform w;
  w.sample_rate = sample_rate_hz;
  w.samples.assign(n, cplx{0.0, 0.0});
  w.samples[0] = 1.0;
  return apply_response(w, node_response(spec));
}

}  // namespace ross
