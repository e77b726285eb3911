#include "ross/baselines.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace ross {

namespace {

void check_spec(const VolterraSpec& s) {
  if (s.k1 <= 0 || s.k1 % 2 == 0)
    throw std::invalid_argument("volterra linear window must be odd and positive");
  if (s.k2 < 0 || (s.k2 != 0 && s.k2 % 2 == 0) || s.k3 < 0 ||
      (s.k3 != 0 && s.k3 % 2 == 0))
    throw std::invalid_argument("volterra nonlinear windows must be odd or zero");
  if (s.k2 > s.k1 || s.k3 > s.k2)
    throw std::invalid_argument("volterra windows must satisfy k1 >= k2 >= k3");
}

}  // namespace

std::size_t volterra_feature_count(const VolterraSpec& s) {
  check_spec(s);
  auto k1 = static_cast<std::size_t>(s.k1);
  auto k2 = static_cast<std::size_t>(s.k2);
  auto k3 = static_cast<std::size_t>(s.k3);
  return k1 + k2 * (k2 + 1) / 2 + k3 * (k3 + 1) * (k3 + 2) / 6 + 1;
}

std::size_t volterra_multiplications(const VolterraSpec& s) {
  check_spec(s);
  auto k1 = static_cast<std::size_t>(s.k1);
  auto k2 = static_cast<std::size_t>(s.k2);
  auto k3 = static_cast<std::size_t>(s.k3);
  return k1 + 2 * k2 * k2 + 3 * k3 * k3 * k3;
}

std::size_t volterra_multiplications_symmetric(const VolterraSpec& s) {
  check_spec(s);
  auto k2 = static_cast<std::size_t>(s.k2);
  auto k3 = static_cast<std::size_t>(s.k3);
  std::size_t pairs = k2 * (k2 + 1) / 2;
  std::size_t triples = k3 * (k3 + 1) * (k3 + 2) / 6;
  // Weight multiply per feature (bias excluded) plus monomial forming:
  // one multiply per pair, two per triple.
  return (volterra_feature_count(s) - 1) + pairs + 2 * triples;
}

FeatureMatrix volterra_features(const std::vector<double>& x,
                                const VolterraSpec& s) {
  check_spec(s);
  const int m1 = s.k1 / 2;
  const int m2 = s.k2 / 2;
  const int m3 = s.k3 / 2;
  const int margin = m1;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t rows = n - 2 * margin;
  if (rows <= 0)
    throw std::invalid_argument("trace shorter than the volterra window");
  const auto cols = static_cast<std::ptrdiff_t>(volterra_feature_count(s));

  FeatureMatrix fm;
  fm.x.resize(rows, cols);
  fm.first_symbol = static_cast<std::size_t>(margin);
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::ptrdiff_t c = r + margin;
    std::ptrdiff_t col = 0;
    for (int d = -m1; d <= m1; ++d) fm.x(r, col++) = x[c + d];
    if (s.k2 > 0) {
      for (int i = -m2; i <= m2; ++i)
        for (int j = i; j <= m2; ++j) fm.x(r, col++) = x[c + i] * x[c + j];
    }
    if (s.k3 > 0) {
      for (int i = -m3; i <= m3; ++i)
        for (int j = i; j <= m3; ++j)
          for (int l = j; l <= m3; ++l)
            fm.x(r, col++) = x[c + i] * x[c + j] * x[c + l];
    }
    fm.x(r, col++) = 1.0;
  }
  return fm;
}

ChannelEstimate estimate_channel(const std::vector<double>& rx,
                                 const std::vector<double>& tx, int n_taps) {
  if (n_taps <= 0) throw std::invalid_argument("channel estimate needs taps >= 1");
  if (rx.size() != tx.size())
    throw std::invalid_argument("channel estimate traces differ in length");
  const auto n = static_cast<std::ptrdiff_t>(rx.size());
  const std::ptrdiff_t rows = n - (n_taps - 1);
  if (rows < 10 * n_taps)
    throw std::invalid_argument(
        "channel estimate needs at least 10 observations per tap, got " +
        std::to_string(rows) + " rows for " + std::to_string(n_taps) + " taps");

  Eigen::MatrixXd a(rows, n_taps);
  Eigen::VectorXd y(rows);
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::ptrdiff_t c = r + n_taps - 1;
    for (int j = 0; j < n_taps; ++j) a(r, j) = tx[c - j];
    y(r) = rx[c];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < n_taps)
    throw std::runtime_error("channel estimate is rank deficient: the probe "
                             "sequence does not excite all " +
                             std::to_string(n_taps) + " taps");
  Eigen::VectorXd h = qr.solve(y);
  ChannelEstimate est;
  est.taps.assign(h.data(), h.data() + h.size());
  est.residual_rms = std::sqrt((a * h - y).squaredNorm() / static_cast<double>(rows));
  return est;
}

std::vector<int> mlse_viterbi(const std::vector<double>& rx,
                              const std::vector<double>& h,
                              const std::vector<double>& constellation,
                              std::size_t state_budget) {
  if (h.empty()) throw std::invalid_argument("mlse needs a nonempty channel");
  const auto m = constellation.size();
  if (m < 2) throw std::invalid_argument("mlse needs at least two levels");
  if (m > 255) throw std::invalid_argument("mlse supports at most 255 levels");
  const int nu = static_cast<int>(h.size()) - 1;

  std::size_t n_states = 1;
  for (int j = 0; j < nu; ++j) {
    if (n_states > state_budget / m)
      throw std::invalid_argument(
          "mlse trellis exceeds the state budget: " + std::to_string(m) + "^" +
          std::to_string(nu) + " states");
    n_states *= m;
  }
  const std::size_t hi_place = nu > 0 ? n_states / m : 1;

  const auto n = rx.size();
  std::vector<int> decided(n, 0);
  if (n == 0) return decided;

  // Digit j of a state (base m, least significant first) is the symbol
  // index emitted j+1 steps in the past.
  std::vector<double> tail(n_states);
  for (std::size_t st = 0; st < n_states; ++st) {
    double acc = 0.0;
    std::size_t rem = st;
    for (int j = 1; j <= nu; ++j) {
      acc += h[static_cast<std::size_t>(j)] * constellation[rem % m];
      rem /= m;
    }
    tail[st] = acc;
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> metric(n_states, 0.0), next(n_states, kInf);
  // Backpointer stores the oldest digit dropped by the transition, which
  // together with the successor state identifies the predecessor.
  std::vector<std::uint8_t> dropped(n * n_states);

  for (std::size_t t = 0; t < n; ++t) {
    std::fill(next.begin(), next.end(), kInf);
    std::uint8_t* drop_t = dropped.data() + t * n_states;
    for (std::size_t st = 0; st < n_states; ++st) {
      const double base = metric[st];
      if (base == kInf) continue;
      const std::size_t shifted = nu > 0 ? (st % hi_place) * m : 0;
      const auto old_digit = static_cast<std::uint8_t>(nu > 0 ? st / hi_place : 0);
      for (std::size_t a = 0; a < m; ++a) {
        const double e = rx[t] - (h[0] * constellation[a] + tail[st]);
        const double cand = base + e * e;
        const std::size_t ns = nu > 0 ? shifted + a : 0;
        if (cand < next[ns]) {
          next[ns] = cand;
          drop_t[ns] = old_digit;
        }
      }
    }
    metric.swap(next);
  }

  std::size_t best = 0;
  for (std::size_t st = 1; st < n_states; ++st)
    if (metric[st] < metric[best]) best = st;

  // Newest symbol sits in digit 0 immediately after its transition.
  std::size_t st = best;
  for (std::size_t t = n; t-- > 0;) {
    decided[t] = static_cast<int>(nu > 0 ? st % m : 0);
    if (nu > 0) st = st / m + dropped[t * n_states + st] * hi_place;
  }
  if (nu == 0) {
    // Memoryless channel degenerates to a per-sample slicer.
    for (std::size_t t = 0; t < n; ++t) {
      int bi = 0;
      double bd = kInf;
      for (std::size_t a = 0; a < m; ++a) {
        const double e = rx[t] - h[0] * constellation[a];
        if (e * e < bd) {
          bd = e * e;
          bi = static_cast<int>(a);
        }
      }
      decided[t] = bi;
    }
  }
  return decided;
}

}  // namespace ross
