#pragma once

#include <cstdint>
#include <vector>

#include "ross/readout.hpp"

namespace ross {

/// 3rd-order Volterra equalizer feature generator. Window lengths per
/// order must be odd (centered like the FFE window) with k1 >= k2 >= k3.
struct VolterraSpec {
  int k1 = 91;
  int k2 = 31;
  int k3 = 11;
};

/// Unique-product feature count: k1 + C(k2+1,2) + C(k3+2,3) + 1 (bias).
std::size_t volterra_feature_count(const VolterraSpec& s);

/// Per-symbol multiplication count of the direct (non-symmetric) kernel
/// realization, sum over orders of m * k_m^m: every order-m kernel entry
/// costs m multiplies (m-1 to form the monomial, one for the weight).
std::size_t volterra_multiplications(const VolterraSpec& s);

/// Multiplications when symmetric (unique) products are formed once and
/// reused: monomial forming plus one weight multiply per unique feature.
std::size_t volterra_multiplications_symmetric(const VolterraSpec& s);

/// Rows cover symbols with full windows of every order; column order is
/// linear taps, then unique pair products (k2 window), then unique triple
/// products (k3 window), then bias. With k2 = k3 = 0 the matrix is
/// bitwise identical to assemble_features on the same trace.
FeatureMatrix volterra_features(const std::vector<double>& x,
                                const VolterraSpec& s);

/// Least-squares channel estimate rx[n] ~ sum_j h[j] tx[n-j].
struct ChannelEstimate {
  std::vector<double> taps;
  double residual_rms = 0.0;
};
ChannelEstimate estimate_channel(const std::vector<double>& rx,
                                 const std::vector<double>& tx, int n_taps);

/// Exact Viterbi maximum-likelihood sequence decision over the trellis of
/// |constellation|^(taps-1) states with Euclidean branch metric.
/// Returns decided symbol indices into the constellation. Throws when the
/// state count exceeds state_budget.
std::vector<int> mlse_viterbi(const std::vector<double>& rx,
                              const std::vector<double>& h,
                              const std::vector<double>& constellation,
                              std::size_t state_budget = 1u << 20);

}  // namespace ross
