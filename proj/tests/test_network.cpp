#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "ross/network.hpp"
#include "ross/rng.hpp"

using namespace ross;

namespace {

TopologyTemplate small_template() {
  TopologyTemplate t;
  t.n_banks = 2;
  t.n_filters = 3;
  t.kind = FilterKind::mzdi;
  t.bandwidth_hz = 30e9;
  t.bank_spacing_hz = 40e9;
  t.filter_spacing_hz = 10e9;
  t.input_coupling = 0.6;
  t.output_coupling = 0.6;
  t.feedback_amplitude = 0.8;
  t.loop_delay_s = 50e-12;
  t.loop_phase_rad = M_PI;
  t.link_delay_s = 1e-12;
  return t;
}

std::vector<double> centers_of(const NetworkTopology& t) {
  std::vector<double> cs;
  for (const auto& b : t.banks)
    for (const auto& f : b.filters)
      cs.push_back(std::visit([](const auto& s) { return s.center_hz; }, f));
  return cs;
}

}  // namespace

TEST_CASE("bank and filter grids expand to the expected centers") {
  const NetworkTopology t = build_topology(small_template());
  REQUIRE(t.banks.size() == 2);
  CHECK(t.output_count() == 6);
  const std::vector<double> cs = centers_of(t);
  // bank k at k * bank_spacing, filter j adds j * filter_spacing
  const std::vector<double> want = {0.0,  10e9, 20e9,
                                    40e9, 50e9, 60e9};
  REQUIRE(cs.size() == want.size());
  for (std::size_t i = 0; i < cs.size(); ++i)
    CHECK(cs[i] == doctest::Approx(want[i]));
}

TEST_CASE("explicit bank offsets override the spacing ladder") {
  TopologyTemplate t = small_template();
  t.n_filters = 1;
  t.bank_offsets_hz = {-4e9, 2e9};
  t.center_hz = 1e9;
  const std::vector<double> cs = centers_of(build_topology(t));
  CHECK(cs[0] == doctest::Approx(-3e9));
  CHECK(cs[1] == doctest::Approx(3e9));
}

TEST_CASE("auto span places all filters uniformly across the band") {
  TopologyTemplate t = small_template();
  t.auto_span = true;
  t.span_hz = 50e9;
  t.center_hz = 0.0;
  const std::vector<double> cs = centers_of(build_topology(t));
  REQUIRE(cs.size() == 6);
  CHECK(cs.front() == doctest::Approx(-25e9));
  CHECK(cs.back() == doctest::Approx(25e9));
  for (std::size_t i = 1; i < cs.size(); ++i)
    CHECK(cs[i] - cs[i - 1] == doctest::Approx(10e9));
}

TEST_CASE("the response set is passive and one per filter") {
  const NetworkTopology t = build_topology(small_template());
  const std::vector<FrequencyResponse> hs = network_responses(t);
  REQUIRE(hs.size() == t.output_count());
  Rng rng(3);
  for (const auto& h : hs)
    for (int i = 0; i < 500; ++i)
      CHECK(std::abs(h(rng.uniform(-150e9, 150e9))) <= 1.0 + 1e-9);
}

TEST_CASE("processing fans a waveform out to every output") {
  SampledWaveform w;
  w.sample_rate = 320e9;
  w.samples.assign(1024, {1e-3, 0.0});
  const NetworkTopology t = build_topology(small_template());
  const std::vector<SampledWaveform> outs = process(w, t);
  REQUIRE(outs.size() == 6);
  for (const auto& o : outs) {
    CHECK(o.size() == w.size());
    CHECK(mean_power(o) <= mean_power(w) + 1e-15);
  }
}

TEST_CASE("unstable loops are rejected with a diagnostic") {
  TopologyTemplate t = small_template();
  t.input_coupling = 0.95;
  t.output_coupling = 0.95;
  t.feedback_amplitude = 1.1;
  CHECK_THROWS_AS((void)network_responses(build_topology(t)),
                  std::invalid_argument);
}

TEST_CASE("zero-amplitude perturbation is the identity") {
  const NetworkTopology t = build_topology(small_template());
  PerturbationSpec p;
  p.relative_jitter = 0.0;
  p.n_eff_std = 0.0;
  p.seed = 77;
  const PerturbedTopology pt = perturb_topology(t, p);
  CHECK(pt.resamples == 0);
  const std::vector<double> a = centers_of(t);
  const std::vector<double> b = centers_of(pt.topology);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  for (std::size_t k = 0; k < t.banks.size(); ++k) {
    CHECK(pt.topology.banks[k].link_transmission ==
          t.banks[k].link_transmission);
    for (double ph : pt.topology.banks[k].link_phase_rad)
      CHECK(ph == doctest::Approx(0.0));
  }
}

TEST_CASE("fabrication jitter stays inside the configured bounds") {
  TopologyTemplate tmpl = small_template();
  tmpl.center_hz = 5e9;  // keep all centers away from 0 so ratios make sense
  const NetworkTopology t = build_topology(tmpl);
  const std::vector<double> base = centers_of(t);

  PerturbationSpec p;
  p.relative_jitter = 0.1;
  p.n_eff_std = 0.05;
  std::set<long> seen;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    p.seed = seed;
    const PerturbedTopology pt = perturb_topology(t, p);
    const std::vector<double> cs = centers_of(pt.topology);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const double rel = cs[i] / base[i] - 1.0;
      CHECK(std::abs(rel) <= 0.1 + 1e-12);
      seen.insert(std::lround(rel * 1e9));
    }
    for (const auto& b : pt.topology.banks)
      CHECK(b.link_transmission <= 1.0 + 1e-12);
  }
  // draws differ across seeds and across filters
  CHECK(seen.size() > 50);
}

TEST_CASE("perturbation is reproducible under a fixed seed") {
  const NetworkTopology t = build_topology(small_template());
  PerturbationSpec p;
  p.relative_jitter = 0.08;
  p.n_eff_std = 0.1;
  p.seed = 1234;
  const std::vector<double> a = centers_of(perturb_topology(t, p).topology);
  const std::vector<double> b = centers_of(perturb_topology(t, p).topology);
  CHECK(a == b);
}

TEST_CASE("per-filter loops change the transfer, shared loops do not") {
  TopologyTemplate t = small_template();
  const std::vector<FrequencyResponse> shared =
      network_responses(build_topology(t));
  t.per_filter_loops = true;
  const std::vector<FrequencyResponse> nested =
      network_responses(build_topology(t));
  double diff = 0.0;
  for (double f = -60e9; f <= 60e9; f += 3e9)
    diff = std::max(diff, std::abs(shared[3](f) - nested[3](f)));
  CHECK(diff > 1e-3);
}
