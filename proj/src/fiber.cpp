#include "ross/fiber.hpp"

#include <fftw3.h>

#include <cmath>
#include <stdexcept>
#include <string>

#include "ross/rng.hpp"

namespace ross {

namespace {
constexpr double kLightSpeed = 299792458.0;  // m/s
constexpr double kPlanck = 6.62607015e-34;   // J s
}  // namespace

FiberSpec FiberSpec::from_link_units(double length_km, double d_ps_nm_km,
                                     double alpha_db_km, double gamma_w_km,
                                     double lambda_nm, double max_step_m) {
  FiberSpec s;
  s.length_m = length_km * 1e3;
  s.dispersion_s_m2 = d_ps_nm_km * 1e-6;  // ps/(nm km) = 1e-6 s/m^2
  s.alpha_db_km = alpha_db_km;
  s.gamma_w_m = gamma_w_km * 1e-3;
  s.lambda_m = lambda_nm * 1e-9;
  s.max_step_m = max_step_m;
  return s;
}

double FiberSpec::beta2() const {
  return -dispersion_s_m2 * lambda_m * lambda_m / (2.0 * M_PI * kLightSpeed);
}

double FiberSpec::alpha_field_per_m() const {
  // dB/km on power -> nepers/m on field
  return alpha_db_km * std::log(10.0) / 10.0 / 1e3 / 2.0;
}

FrequencyResponse fiber_linear_response(const FiberSpec& spec) {
  const double amp = std::exp(-spec.alpha_field_per_m() * spec.length_m);
  const double b2l = spec.beta2() * spec.length_m;
  auto eval = [amp, b2l](double f) {
    double ph = 2.0 * M_PI * M_PI * b2l * f * f;
    return amp * cplx{std::cos(ph), std::sin(ph)};
  };
  return FrequencyResponse(eval, 0.0,
                           std::numeric_limits<double>::infinity(), amp);
}

SampledWaveform propagate(const SampledWaveform& w, const FiberSpec& spec) {
  if (spec.length_m <= 0.0) {
    throw std::invalid_argument("fiber length must be positive");
  }
  if (spec.max_step_m <= 0.0) {
    throw std::invalid_argument("fiber max_step must be positive");
  }
  const std::size_t n = w.samples.size();
  if (n == 0) throw std::invalid_argument("empty waveform");
  const double occ = occupied_bandwidth_hz(w, 0.999);
  if (w.sample_rate < 4.0 * occ) {
    throw std::invalid_argument(
        "grid bandwidth " + std::to_string(w.sample_rate * 1e-9) +
        " GHz is below 4x the signal occupancy " +
        std::to_string(occ * 1e-9) + " GHz");
  }

  const int steps =
      static_cast<int>(std::ceil(spec.length_m / spec.max_step_m));
  const double h = spec.length_m / steps;
  const double beta2 = spec.beta2();
  const double alpha_f = spec.alpha_field_per_m();
  const double gamma = spec.gamma_w_m;

  // per-bin linear factors for a half step and a full step (natural order)
  const double df = w.sample_rate / static_cast<double>(n);
  const std::size_t halfn = n / 2;
  std::vector<cplx> lin_half(n), lin_full(n);
  for (std::size_t k = 0; k < n; ++k) {
    double f = (k < halfn ? static_cast<double>(k)
                          : static_cast<double>(k) - static_cast<double>(n)) *
               df;
    double ph = 2.0 * M_PI * M_PI * beta2 * f * f;
    cplx full = std::exp(-alpha_f * h) * cplx{std::cos(ph * h), std::sin(ph * h)};
    cplx half = std::exp(-alpha_f * h / 2.0) *
                cplx{std::cos(ph * h / 2.0), std::sin(ph * h / 2.0)};
    lin_full[k] = full;
    lin_half[k] = half;
  }

  // reuse one in-place plan per call; FFTW_ESTIMATE keeps planning cheap
  std::vector<cplx> a = w.samples;
  auto* pa = reinterpret_cast<fftw_complex*>(a.data());
  fftw_plan fwd = nullptr, bwd = nullptr;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_lock());
    fwd = fftw_plan_dft_1d(static_cast<int>(n), pa, pa, FFTW_FORWARD,
                           FFTW_ESTIMATE);
    bwd = fftw_plan_dft_1d(static_cast<int>(n), pa, pa, FFTW_BACKWARD,
                           FFTW_ESTIMATE);
  }
  if (!fwd || !bwd) throw std::runtime_error("fftw plan creation failed");
  auto destroy_plans = [&]() {
    std::lock_guard<std::mutex> lock(fftw_planner_lock());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  };
  const double inv_n = 1.0 / static_cast<double>(n);

  auto linear = [&](const std::vector<cplx>& factor) {
    fftw_execute(fwd);
    for (std::size_t k = 0; k < n; ++k) a[k] *= factor[k];
    fftw_execute(bwd);
    for (std::size_t k = 0; k < n; ++k) a[k] *= inv_n;
  };

  linear(lin_half);
  for (int step = 0; step < steps; ++step) {
    bool finite = true;
    if (gamma != 0.0) {
      for (std::size_t k = 0; k < n; ++k) {
        double p = std::norm(a[k]);
        finite = finite && std::isfinite(p);
        double ph = gamma * p * h;
        a[k] *= cplx{std::cos(ph), std::sin(ph)};
      }
    } else {
      for (std::size_t k = 0; k < n; k += 64) {
        finite = finite && std::isfinite(std::norm(a[k]));
      }
    }
    if (!finite) {
      destroy_plans();
      throw std::runtime_error("field became non-finite at split step " +
                               std::to_string(step) + " of " +
                               std::to_string(steps) + " (z = " +
                               std::to_string(step * h) + " m)");
    }
    linear(step + 1 < steps ? lin_full : lin_half);
  }
  destroy_plans();

  SampledWaveform out;
  out.sample_rate = w.sample_rate;
  out.center_offset = w.center_offset;
  out.samples = std::move(a);
  return out;
}

SampledWaveform amplify(const SampledWaveform& w, const AmplifierSpec& spec,
                        std::uint64_t seed) {
  if (spec.gain_db < 0.0) {
    throw std::invalid_argument("amplifier gain must be >= 0 dB");
  }
  const double g = std::pow(10.0, spec.gain_db / 10.0);
  const double amp = std::sqrt(g);
  SampledWaveform out = w;
  for (cplx& s : out.samples) s *= amp;
  if (spec.noise_on && spec.gain_db > 0.0) {
    const double nsp = std::pow(10.0, spec.noise_figure_db / 10.0) / 2.0;
    const double var = (g - 1.0) * nsp * kPlanck * spec.center_frequency_hz *
                       w.sample_rate;
    const double sigma = std::sqrt(var);
    Rng rng(seed);
    for (cplx& s : out.samples) s += sigma * rng.complex_normal();
  }
  return out;
}

}  // namespace ross
