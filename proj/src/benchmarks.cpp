#include "ross/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ross/rng.hpp"
#include "ross/signal.hpp"

namespace ross {

std::vector<double> narma10(const std::vector<double>& u) {
  const auto n = static_cast<std::ptrdiff_t>(u.size());
  std::vector<double> y(u.size(), 0.0);
  for (std::ptrdiff_t t = 0; t + 1 < n; ++t) {
    double s = 0.0;
    for (std::ptrdiff_t i = 1; i <= 10; ++i)
      if (t - i >= 0) s += y[t - i];
    const double u_old = t - 10 >= 0 ? u[t - 10] : 0.0;
    const double next =
        0.3 * y[t] + 0.05 * y[t] * s + 1.5 * u_old * u[t] + 0.1;
    if (!std::isfinite(next) || std::abs(next) > 10.0)
      throw std::runtime_error("narma10 diverged at step " +
                               std::to_string(t + 1));
    y[t + 1] = next;
  }
  return y;
}

NarmaSequence narma10_with_guard(std::size_t n, std::uint64_t seed,
                                 int max_regen) {
  for (int attempt = 0; attempt < max_regen; ++attempt) {
    Rng rng(derive_seed(seed, "narma-input", static_cast<std::uint64_t>(attempt)));
    NarmaSequence seq;
    seq.u.resize(n);
    for (double& v : seq.u) v = rng.uniform(0.0, 0.5);
    try {
      seq.y = narma10(seq.u);
    } catch (const std::runtime_error&) {
      continue;
    }
    seq.regenerations = attempt;
    return seq;
  }
  throw std::runtime_error("narma10 diverged on " + std::to_string(max_regen) +
                           " consecutive input drives");
}

namespace {

double squared_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double n = static_cast<double>(a.size());
  const double ma = a.mean(), mb = b.mean();
  const double cov = (a.array() - ma).cwiseProduct(b.array() - mb).sum() / n;
  const double va = (a.array() - ma).square().sum() / n;
  const double vb = (b.array() - mb).square().sum() / n;
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return cov * cov / (va * vb);
}

}  // namespace

std::vector<double> memory_function(const DecisionSamples& samples,
                                    const std::vector<double>& u,
                                    std::size_t i_max, std::size_t n_train) {
  if (i_max == 0) throw std::invalid_argument("memory function needs i_max >= 1");
  FeatureMatrix f = assemble_features(samples, TapWindow{0, 0});
  if (u.size() < f.first_symbol + static_cast<std::size_t>(f.x.rows()))
    throw std::invalid_argument("input drive shorter than the output trace");

  // All delays regress on the same rows so the estimates are comparable.
  const auto r0 = static_cast<std::ptrdiff_t>(i_max);
  const std::ptrdiff_t rows = f.x.rows() - r0;
  const auto nt = static_cast<std::ptrdiff_t>(n_train);
  if (rows < nt + 8)
    throw std::invalid_argument("memory function needs at least 8 test rows");

  FeatureMatrix g;
  g.x = f.x.bottomRows(rows);
  g.first_symbol = f.first_symbol + i_max;
  standardize_features(g, n_train);

  const Eigen::MatrixXd xt = g.x.topRows(nt);
  const Eigen::MatrixXd xv = g.x.bottomRows(rows - nt);
  const double lambda =
      1e-8 * xt.squaredNorm() / static_cast<double>(nt);

  std::vector<double> m(i_max);
  Eigen::VectorXd yt(nt), yv(rows - nt);
  for (std::size_t i = 1; i <= i_max; ++i) {
    for (std::ptrdiff_t r = 0; r < nt; ++r)
      yt(r) = u[g.first_symbol + static_cast<std::size_t>(r) - i];
    for (std::ptrdiff_t r = nt; r < rows; ++r)
      yv(r - nt) = u[g.first_symbol + static_cast<std::size_t>(r) - i];
    const Eigen::MatrixXd w = ridge_solve(xt, yt, lambda);
    m[i - 1] = squared_correlation(xv * w, yv);
  }
  return m;
}

double memory_capacity(const std::vector<double>& m) {
  double s = 0.0;
  for (double v : m) s += v;
  return s;
}

FadingProfile fading_profile(const FiberSpec& fiber, double max_freq_hz,
                             std::uint64_t seed, std::size_t n_tones) {
  if (max_freq_hz <= 0.0) throw std::invalid_argument("probe span must be positive");
  if (n_tones < 8) throw std::invalid_argument("probe needs at least 8 tones");
  const double fs = 4.0 * max_freq_hz;
  std::size_t n = 1;
  while (n < 32 * n_tones) n <<= 1;
  const double df = fs / static_cast<double>(n);

  // Tones on exact bins: no leakage, the transfer ratio is read directly.
  std::vector<std::size_t> bins(n_tones);
  for (std::size_t j = 0; j < n_tones; ++j) {
    auto k = static_cast<std::size_t>(
        std::llround((static_cast<double>(j + 1) / static_cast<double>(n_tones)) *
                     max_freq_hz / df));
    bins[j] = std::min(k, n / 2 - 1);
  }
  bins.erase(std::unique(bins.begin(), bins.end()), bins.end());

  Rng rng(derive_seed(seed, "fading-probe"));
  std::vector<double> phase(bins.size());
  for (double& p : phase) p = rng.uniform(0.0, 2.0 * M_PI);

  const double p0 = 1e-3;
  const double mu = 0.02 * std::sqrt(2.0 / static_cast<double>(bins.size()));
  SampledWaveform in;
  in.sample_rate = fs;
  in.samples.resize(n);
  std::vector<double> p_in(n);
  for (std::size_t t = 0; t < n; ++t) {
    double m = 0.0;
    for (std::size_t j = 0; j < bins.size(); ++j)
      m += mu * std::cos(2.0 * M_PI * static_cast<double>(bins[j]) *
                             static_cast<double>(t) / static_cast<double>(n) +
                         phase[j]);
    p_in[t] = p0 * std::max(1.0 + m, 0.0);
    in.samples[t] = std::sqrt(p_in[t]);
  }

  SampledWaveform out = propagate(in, fiber);
  SampledWaveform in_power = in, out_power = out;
  for (std::size_t t = 0; t < n; ++t) {
    in_power.samples[t] = p_in[t];
    out_power.samples[t] = std::norm(out.samples[t]);
  }
  const Spectrum si = forward_spectrum(in_power);
  const Spectrum so = forward_spectrum(out_power);

  FadingProfile prof;
  prof.freq_hz.reserve(bins.size());
  prof.gain.reserve(bins.size());
  for (std::size_t j = 0; j < bins.size(); ++j) {
    const std::size_t k = n / 2 + bins[j];
    const double denom = std::abs(si.bins[k]);
    if (denom <= 0.0) continue;
    prof.freq_hz.push_back(static_cast<double>(bins[j]) * df);
    prof.gain.push_back(std::abs(so.bins[k]) / denom);
  }
  if (prof.gain.empty())
    throw std::runtime_error("fading probe produced no usable tones");
  const double ref = prof.gain.front();
  for (double& g : prof.gain) g /= ref;
  return prof;
}

std::vector<double> fading_null_frequencies(const FiberSpec& fiber, int count) {
  std::vector<double> nulls;
  const double b2l = std::abs(fiber.beta2()) * fiber.length_m;
  if (b2l <= 0.0 || count <= 0) return nulls;
  for (int k = 0; k < count; ++k)
    nulls.push_back(std::sqrt((2.0 * k + 1.0) / (4.0 * M_PI * b2l)));
  return nulls;
}

std::vector<double> find_profile_minima(const FadingProfile& p, int count) {
  std::vector<double> out;
  for (std::size_t j = 1; j + 1 < p.gain.size(); ++j) {
    if (static_cast<int>(out.size()) >= count) break;
    if (p.gain[j] > 0.5) continue;  // only dips below -6 dB count as nulls
    if (!(p.gain[j] <= p.gain[j - 1] && p.gain[j] <= p.gain[j + 1])) continue;
    // Parabolic refinement around the discrete minimum.
    const double y0 = p.gain[j - 1], y1 = p.gain[j], y2 = p.gain[j + 1];
    const double denom = y0 - 2.0 * y1 + y2;
    double f = p.freq_hz[j];
    if (denom > 0.0) {
      const double shift = 0.5 * (y0 - y2) / denom;
      const double half_step = 0.5 * (p.freq_hz[j + 1] - p.freq_hz[j - 1]);
      f += std::clamp(shift, -1.0, 1.0) * half_step;
    }
    out.push_back(f);
    ++j;  // skip the immediate neighbor of an accepted dip
  }
  return out;
}

}  // namespace ross
