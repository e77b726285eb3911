#include "ross/transmitter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ross/filters.hpp"
#include "ross/rng.hpp"

namespace ross {

namespace {

unsigned gray2(unsigned i) { return i ^ (i >> 1); }

struct ConstellationTable {
  std::vector<cplx> points;
  std::vector<unsigned> bits;
};

ConstellationTable make_pam4() {
  ConstellationTable t;
  const double norm = std::sqrt(5.0);
  for (unsigned i = 0; i < 4; ++i) {
    t.points.push_back({(2.0 * i - 3.0) / norm, 0.0});
    t.bits.push_back(gray2(i));
  }
  return t;
}

ConstellationTable make_qam16() {
  ConstellationTable t;
  const double norm = std::sqrt(10.0);
  for (unsigned ii = 0; ii < 4; ++ii) {
    for (unsigned qq = 0; qq < 4; ++qq) {
      t.points.push_back(
          {(2.0 * ii - 3.0) / norm, (2.0 * qq - 3.0) / norm});
      t.bits.push_back((gray2(ii) << 2) | gray2(qq));
    }
  }
  return t;
}

// Cross 32-QAM: 6x6 grid minus the four corners. The inner 4x4 square
// carries 4-bit Gray patterns with MSB 0; each of the 16 rim points clamps
// to its nearest inner point and reuses that pattern with MSB 1, so
// rim-inner neighbors differ in one bit.
ConstellationTable make_qam32() {
  ConstellationTable t;
  double norm = std::sqrt(1480.0 / 32.0);
  auto coord = [](unsigned idx) { return 2.0 * idx - 5.0; };
  auto inner_bits = [](unsigned row, unsigned col) {
    return (gray2(row - 1) << 2) | gray2(col - 1);
  };
  for (unsigned row = 0; row < 6; ++row) {
    for (unsigned col = 0; col < 6; ++col) {
      bool corner = (row == 0 || row == 5) && (col == 0 || col == 5);
      if (corner) continue;
      bool inner = row >= 1 && row <= 4 && col >= 1 && col <= 4;
      unsigned r = std::clamp(row, 1u, 4u);
      unsigned c = std::clamp(col, 1u, 4u);
      unsigned b = inner_bits(r, c) | (inner ? 0u : 16u);
      t.points.push_back({coord(row) / norm, coord(col) / norm});
      t.bits.push_back(b);
    }
  }
  return t;
}

const ConstellationTable& table_for(ModFormat f) {
  static const ConstellationTable pam4 = make_pam4();
  static const ConstellationTable qam16 = make_qam16();
  static const ConstellationTable qam32 = make_qam32();
  switch (f) {
    case ModFormat::pam4:
      return pam4;
    case ModFormat::qam16:
      return qam16;
    case ModFormat::qam32:
      return qam32;
    default:
      throw std::invalid_argument("format has no constellation");
  }
}

}  // namespace

const std::vector<cplx>& constellation(ModFormat format) {
  return table_for(format).points;
}

int bits_per_symbol(ModFormat format) {
  switch (format) {
    case ModFormat::pam4:
      return 2;
    case ModFormat::qam16:
      return 4;
    case ModFormat::qam32:
      return 5;
    default:
      throw std::invalid_argument("format has no bit mapping");
  }
}

unsigned gray_bits(ModFormat format, std::size_t point_index) {
  const auto& t = table_for(format);
  return t.bits.at(point_index);
}

SymbolStream generate_symbols(ModFormat format, std::size_t n, double baud,
                              std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("need at least one symbol");
  if (format == ModFormat::analog) {
    throw std::invalid_argument(
        "analog streams are produced by the task generator, not "
        "generate_symbols");
  }
  const auto& pts = constellation(format);
  SymbolStream s;
  s.format = format;
  s.baud = baud;
  s.seed = seed;
  s.symbols.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    s.symbols.push_back(pts[rng.below(pts.size())]);
  }
  return s;
}

SymbolStream analog_stream(const std::vector<double>& values, double baud) {
  SymbolStream s;
  s.format = ModFormat::analog;
  s.baud = baud;
  s.symbols.reserve(values.size());
  for (double v : values) s.symbols.push_back({v, 0.0});
  return s;
}

LkTrace integrate_lang_kobayashi(const LkParams& p, double duration_s,
                                 double dt_s, std::uint64_t seed) {
  if (dt_s > 1e-12) {
    throw std::invalid_argument("LK integration step must be <= 1 ps");
  }
  const std::size_t n = static_cast<std::size_t>(duration_s / dt_s);
  LkTrace tr;
  tr.dt_s = dt_s;
  tr.field.reserve(n);
  tr.carriers.reserve(n);

  // steady-state fixed point as the starting guess
  double photons = 1e5, carriers = p.transparency_number;
  const double pump = p.bias_current_a / 1.602176634e-19;
  for (int it = 0; it < 200; ++it) {
    carriers = p.transparency_number +
               (1.0 + p.saturation * photons) /
                   (p.gain_per_s * p.photon_lifetime_s);
    photons = std::max(
        1.0, p.photon_lifetime_s * (pump - carriers / p.carrier_lifetime_s));
  }
  cplx e{std::sqrt(photons), 0.0};
  double nn = carriers;
  Rng rng(seed);
  const cplx half_drift_coef{0.5, 0.5 * p.alpha};
  for (std::size_t i = 0; i < n; ++i) {
    double pw = std::norm(e);
    double gain = p.gain_per_s * (nn - p.transparency_number) /
                  (1.0 + p.saturation * pw);
    cplx de = half_drift_coef * (gain - 1.0 / p.photon_lifetime_s) * e;
    cplx noise{0.0, 0.0};
    if (p.noise) {
      noise = std::sqrt(2.0 * p.spont_rate_per_s * std::max(nn, 0.0) * dt_s) *
              rng.complex_normal();
    }
    e += de * dt_s + noise;
    nn += dt_s * (pump - nn / p.carrier_lifetime_s - gain * pw);
    if (!std::isfinite(nn) || !std::isfinite(std::norm(e)) ||
        std::norm(e) > 1e15) {
      throw std::runtime_error(
          "Lang-Kobayashi integration diverged at t = " +
          std::to_string(i * dt_s * 1e9) + " ns (reduce dt or check bias)");
    }
    tr.field.push_back(e);
    tr.carriers.push_back(nn);
  }
  return tr;
}

SampledWaveform laser_field(const LaserSpec& spec, double duration_s,
                            double sample_rate_hz) {
  const std::size_t n =
      static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  if (n < 2) throw std::invalid_argument("laser trace too short");
  SampledWaveform w;
  w.sample_rate = sample_rate_hz;
  w.samples.resize(n);
  if (spec.power_w <= 0.0) {
    throw std::invalid_argument("laser power must be positive");
  }

  if (spec.mode == LaserSpec::Mode::phase_noise_cw) {
    const double amp = std::sqrt(spec.power_w);
    if (spec.linewidth_hz <= 0.0) {
      std::fill(w.samples.begin(), w.samples.end(), cplx{amp, 0.0});
      return w;
    }
    Rng rng(spec.seed);
    const double sigma =
        std::sqrt(2.0 * M_PI * spec.linewidth_hz / sample_rate_hz);
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w.samples[i] = amp * cplx{std::cos(phase), std::sin(phase)};
      phase += sigma * rng.normal();
    }
    return w;
  }

  // LK mode: integrate at a substep <= 1 ps, keep every k-th point
  const double dt_out = 1.0 / sample_rate_hz;
  const int k = static_cast<int>(std::ceil(dt_out / 1e-12));
  const double dt = dt_out / k;
  const double warmup_s = 30e-9;
  LkTrace tr = integrate_lang_kobayashi(
      spec.lk, warmup_s + (n + 1) * dt_out, dt, spec.seed);
  const std::size_t skip = static_cast<std::size_t>(warmup_s / dt);
  double mean_photons = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_photons += std::norm(tr.field[skip + i * k]);
  }
  mean_photons /= static_cast<double>(n);
  const double scale = std::sqrt(spec.power_w / mean_photons);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = scale * tr.field[skip + i * k];
  }
  return w;
}

SampledWaveform modulate(const SymbolStream& stream, const TxSpec& tx) {
  if (stream.symbols.empty()) throw std::invalid_argument("empty stream");
  if (stream.baud <= 0.0) throw std::invalid_argument("baud must be positive");
  if (tx.oversampling < 2) {
    throw std::invalid_argument("oversampling must be >= 2");
  }
  if (tx.mzm_bandwidth_hz <= 0.0) {
    throw std::invalid_argument("mzm bandwidth must be positive");
  }
  const double fs = stream.baud * tx.oversampling;
  if (tx.mzm_bandwidth_hz > fs / 2.0) {
    throw std::invalid_argument(
        "oversampling too low for the MZM bandwidth: Nyquist " +
        std::to_string(fs / 2e9) + " GHz < " +
        std::to_string(tx.mzm_bandwidth_hz / 1e9) + " GHz");
  }
  const std::size_t n = stream.symbols.size() * tx.oversampling;
  const bool coherent =
      stream.format == ModFormat::qam16 || stream.format == ModFormat::qam32;

  SampledWaveform env;
  env.sample_rate = fs;
  env.samples.resize(n);

  if (!coherent) {
    // IM: drive in [0,1] per symbol, power levels r + (1-r)*drive
    const double r = std::pow(10.0, -tx.extinction_ratio_db / 10.0);
    std::vector<double> drive(stream.symbols.size());
    if (stream.format == ModFormat::pam4) {
      const auto& pts = constellation(ModFormat::pam4);
      for (std::size_t i = 0; i < stream.symbols.size(); ++i) {
        std::size_t best = 0;
        double bestd = 1e300;
        for (std::size_t j = 0; j < pts.size(); ++j) {
          double d = std::abs(stream.symbols[i].real() - pts[j].real());
          if (d < bestd) {
            bestd = d;
            best = j;
          }
        }
        drive[i] = static_cast<double>(best) / 3.0;
      }
    } else {  // analog
      for (std::size_t i = 0; i < stream.symbols.size(); ++i) {
        drive[i] = std::clamp(
            stream.symbols[i].real() / tx.analog_full_scale, 0.0, 1.0);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double d = drive[i / tx.oversampling];
      env.samples[i] = {std::sqrt(r + (1.0 - r) * d), 0.0};
    }
    env = apply_response(
        env, butterworth_response({2, tx.mzm_bandwidth_hz, 0.0}));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      env.samples[i] = stream.symbols[i / tx.oversampling];
    }
    env = apply_response(
        env, butterworth_response({2, tx.mzm_bandwidth_hz, 0.0}));
    // carrier-to-signal ratio set after filtering so it is exact
    const double rho = std::pow(10.0, tx.cspr_db / 10.0);
    double ms = mean_power(env);
    const double sig_scale = std::sqrt(1.0 / (1.0 + rho) / ms);
    const double carrier = std::sqrt(rho / (1.0 + rho));
    for (cplx& v : env.samples) v = carrier + sig_scale * v;
  }

  SampledWaveform field = laser_field(
      tx.laser, static_cast<double>(n) / fs, fs);
  SampledWaveform out;
  out.sample_rate = fs;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = env.samples[i] * field.samples[i];
  }
  return out;
}

}  // namespace ross
