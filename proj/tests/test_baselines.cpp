#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "ross/baselines.hpp"
#include "ross/rng.hpp"

using namespace ross;

TEST_CASE("unique-product feature counts follow the binomials") {
  // k1 + C(k2+1, 2) + C(k3+2, 3) + bias
  CHECK(volterra_feature_count({3, 3, 0}) == 3u + 6u + 0u + 1u);
  CHECK(volterra_feature_count({5, 3, 3}) == 5u + 6u + 10u + 1u);
  CHECK(volterra_feature_count({91, 31, 11}) == 91u + 496u + 286u + 1u);
}

TEST_CASE("the direct kernel realization costs the advertised multiplies") {
  // sum over orders of m * k_m^m
  CHECK(volterra_multiplications({91, 31, 11}) ==
        91u + 2u * 31u * 31u + 3u * 11u * 11u * 11u);
  CHECK(volterra_multiplications({91, 31, 11}) == 6006u);
  CHECK(volterra_multiplications_symmetric({91, 31, 11}) <
        volterra_multiplications({91, 31, 11}));
  // first-order only: one weight multiply per tap either way
  CHECK(volterra_multiplications({15, 0, 0}) == 15u);
}

TEST_CASE("kernel features enumerate taps, pairs, triples, bias") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const FeatureMatrix f = volterra_features(x, {3, 3, 3});
  // full windows exist for symbols 1..3
  CHECK(f.first_symbol == 1);
  REQUIRE(f.x.rows() == 3);
  REQUIRE(f.x.cols() == 3 + 6 + 10 + 1);
  // symbol 1, window {1,2,3}: linear taps first
  CHECK(f.x(0, 0) == 1.0);
  CHECK(f.x(0, 1) == 2.0);
  CHECK(f.x(0, 2) == 3.0);
  // pair products are the upper triangle of the window outer product
  double pair_sum = 0.0;
  for (int c = 3; c < 9; ++c) pair_sum += f.x(0, c);
  CHECK(pair_sum == doctest::Approx(1 + 2 + 3 + 4 + 6 + 9));
  CHECK(f.x(0, f.x.cols() - 1) == 1.0);
}

TEST_CASE("a first-order kernel is the plain tap window, bitwise") {
  Rng rng(3);
  DecisionSamples ds;
  ds.baud = 1.0;
  ds.outputs.assign(1, std::vector<double>(256));
  for (double& v : ds.outputs[0]) v = rng.normal();
  const FeatureMatrix a = volterra_features(ds.outputs[0], {11, 0, 0});
  const FeatureMatrix b = assemble_features(ds, TapWindow{5, 5});
  REQUIRE(a.x.rows() == b.x.rows());
  REQUIRE(a.x.cols() == b.x.cols());
  CHECK(a.first_symbol == b.first_symbol);
  CHECK(std::memcmp(a.x.data(), b.x.data(),
                    sizeof(double) * static_cast<std::size_t>(a.x.size())) ==
        0);
}

TEST_CASE("window lengths must be odd and ordered") {
  CHECK_THROWS_AS((void)volterra_features({1, 2, 3}, {4, 0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)volterra_features({1, 2, 3}, {5, 7, 0}),
                  std::invalid_argument);
}

TEST_CASE("least squares recovers a known channel exactly") {
  Rng rng(4);
  const std::vector<double> h = {0.2, 1.0, -0.4};
  std::vector<double> tx(400), rx(400, 0.0);
  for (double& v : tx) v = rng.normal();
  for (std::size_t n = 0; n < tx.size(); ++n)
    for (std::size_t j = 0; j < h.size() && j <= n; ++j)
      rx[n] += h[j] * tx[n - j];

  const ChannelEstimate est = estimate_channel(rx, tx, 3);
  REQUIRE(est.taps.size() == 3);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(est.taps[j] == doctest::Approx(h[j]).epsilon(1e-9));
  CHECK(est.residual_rms < 1e-9);
}

TEST_CASE("the trellis decodes a noiseless channel perfectly") {
  Rng rng(5);
  const std::vector<double> cst = {-3, -1, 1, 3};
  const std::vector<double> h = {1.0, 0.45, -0.2};
  const std::size_t n = 2000;
  std::vector<int> tx(n);
  for (int& s : tx) s = static_cast<int>(rng.uniform01() * 4);
  std::vector<double> rx(n, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < h.size() && j <= t; ++j)
      rx[t] += h[j] * cst[tx[t - j]];

  const std::vector<int> decided = mlse_viterbi(rx, h, cst);
  std::size_t wrong = 0;
  for (std::size_t t = 0; t < n; ++t) wrong += decided[t] != tx[t];
  CHECK(wrong == 0);
}

TEST_CASE("oversized trellises hit the state budget") {
  const std::vector<double> h(13, 0.1);  // 4^12 states
  const std::vector<double> rx(32, 0.0);
  CHECK_THROWS_AS((void)mlse_viterbi(rx, h, {-3, -1, 1, 3}),
                  std::invalid_argument);
}

TEST_CASE("a memoryless trellis degenerates to the nearest level") {
  const std::vector<double> cst = {-3, -1, 1, 3};
  const std::vector<double> rx = {2.7, -0.4, -3.9, 1.4};
  const std::vector<int> decided = mlse_viterbi(rx, {1.0}, cst);
  CHECK(decided == std::vector<int>{3, 1, 0, 2});
}
