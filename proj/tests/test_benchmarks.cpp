#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ross/benchmarks.hpp"
#include "ross/rng.hpp"

using namespace ross;

TEST_CASE("the recursion starts from its fixed entry values") {
  const std::vector<double> u(64, 0.25);
  const std::vector<double> y = narma10(u);
  REQUIRE(y.size() == u.size());
  CHECK(y[0] == 0.0);
  CHECK(y[1] == doctest::Approx(0.1));  // 0.3*0 + 0.05*0*0 + 1.5*0*0 + 0.1
}

TEST_CASE("zero drive settles on the analytic fixed point") {
  const std::vector<double> u(4000, 0.0);
  const std::vector<double> y = narma10(u);
  // y* solves 0.5 y*^2 - 0.7 y* + 0.1 = 0 inside the basin
  const double want = (0.7 - std::sqrt(0.49 - 0.2)) / 1.0;
  CHECK(y.back() == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("drives outside the basin of attraction throw") {
  std::vector<double> u(512, 0.499);
  CHECK_THROWS_AS((void)narma10(u), std::runtime_error);
}

TEST_CASE("the guarded generator redraws diverging inputs") {
  const NarmaSequence s = narma10_with_guard(3000, 7);
  REQUIRE(s.u.size() == 3000);
  REQUIRE(s.y.size() == 3000);
  CHECK(s.regenerations >= 0);
  for (double v : s.u) {
    CHECK(v >= 0.0);
    CHECK(v < 0.5);
  }
  for (double v : s.y) CHECK(std::abs(v) <= 10.0);
  // deterministic under the seed
  const NarmaSequence t = narma10_with_guard(3000, 7);
  CHECK(s.u == t.u);
  CHECK(s.y == t.y);
  const NarmaSequence o = narma10_with_guard(3000, 8);
  CHECK(s.u != o.u);
}

TEST_CASE("a bank of pure delay lines has unit memory per tap") {
  Rng rng(5);
  const std::size_t n = 4000, i_max = 12, n_train = 1500;
  std::vector<double> u(n);
  for (double& v : u) v = rng.uniform01();

  DecisionSamples ds;
  ds.baud = 1.0;
  ds.outputs.assign(4, std::vector<double>(n, 0.0));
  // output k reproduces u delayed by k+1 symbols
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t t = k + 1; t < n; ++t)
      ds.outputs[k][t] = u[t - k - 1];

  const std::vector<double> m = memory_function(ds, u, i_max, n_train);
  REQUIRE(m.size() == i_max);
  for (std::size_t i = 0; i < 4; ++i) CHECK(m[i] > 0.999);
  for (std::size_t i = 4; i < i_max; ++i) CHECK(m[i] < 0.05);
  const double mc = memory_capacity(m);
  CHECK(mc > 3.9);
  CHECK(mc < 4.3);
}

TEST_CASE("dispersion null positions follow the quadratic-phase formula") {
  const FiberSpec f = FiberSpec::from_link_units(20.0, 17.0, 0.2, 0.0, 1550.0);
  const std::vector<double> nulls = fading_null_frequencies(f, 4);
  REQUIRE(nulls.size() == 4);
  const double b2l = std::abs(f.beta2()) * f.length_m;
  for (int k = 0; k < 4; ++k)
    CHECK(nulls[k] ==
          doctest::Approx(std::sqrt((2.0 * k + 1.0) / (4.0 * M_PI * b2l))));
  CHECK(nulls[0] == doctest::Approx(13.5e9).epsilon(0.01));
}

TEST_CASE("profile minima are found and refined on a synthetic fade") {
  FadingProfile p;
  const double null1 = 9e9, fmax = 30e9;
  for (int i = 0; i <= 600; ++i) {
    const double f = fmax * i / 600.0;
    p.freq_hz.push_back(f);
    // |cos(a f^2)| with the first zero at null1
    p.gain.push_back(std::abs(std::cos(M_PI / 2.0 * f * f / (null1 * null1))));
  }
  // the refinement fits a parabola across the |cos| kink: good to ~half a
  // grid step
  const std::vector<double> minima = find_profile_minima(p, 3);
  REQUIRE(minima.size() == 3);
  CHECK(minima[0] == doctest::Approx(null1).epsilon(5e-3));
  CHECK(minima[1] == doctest::Approx(null1 * std::sqrt(3.0)).epsilon(5e-3));
  CHECK(minima[2] == doctest::Approx(null1 * std::sqrt(5.0)).epsilon(5e-3));
}

TEST_CASE("the simulated fading probe matches the analytic nulls") {
  const FiberSpec f = FiberSpec::from_link_units(20.0, 17.0, 0.2, 0.0, 1550.0);
  const FadingProfile prof = fading_profile(f, 35e9, 11, 384);
  REQUIRE(prof.freq_hz.size() == prof.gain.size());
  CHECK(prof.gain.front() == doctest::Approx(1.0).epsilon(0.05));
  const std::vector<double> nulls = fading_null_frequencies(f, 3);
  const std::vector<double> minima = find_profile_minima(prof, 3);
  REQUIRE(minima.size() == 3);
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(minima[k] == doctest::Approx(nulls[k]).epsilon(0.02));
}
