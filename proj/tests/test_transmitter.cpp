#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ross/signal.hpp"
#include "ross/transmitter.hpp"

using namespace ross;

TEST_CASE("constellations have unit average power and gray labels") {
  for (ModFormat fmt : {ModFormat::pam4, ModFormat::qam16, ModFormat::qam32}) {
    const auto& pts = constellation(fmt);
    double p = 0.0;
    for (const cplx& c : pts) p += std::norm(c);
    CHECK(p / static_cast<double>(pts.size()) == doctest::Approx(1.0));
    CHECK(static_cast<int>(pts.size()) == 1 << bits_per_symbol(fmt));
  }
  // PAM4 neighbors differ in exactly one bit
  const auto& pam = constellation(ModFormat::pam4);
  for (std::size_t i = 0; i + 1 < pam.size(); ++i) {
    const unsigned diff =
        gray_bits(ModFormat::pam4, i) ^ gray_bits(ModFormat::pam4, i + 1);
    CHECK((diff & (diff - 1)) == 0u);
    CHECK(diff != 0u);
  }
}

TEST_CASE("symbol generation is seed-deterministic") {
  const SymbolStream a = generate_symbols(ModFormat::qam16, 512, 100e9, 5);
  const SymbolStream b = generate_symbols(ModFormat::qam16, 512, 100e9, 5);
  const SymbolStream c = generate_symbols(ModFormat::qam16, 512, 100e9, 6);
  CHECK(a.symbols == b.symbols);
  CHECK(a.symbols != c.symbols);
}

TEST_CASE("intensity modulation honors the extinction ratio") {
  // constant ANALOG drives at the two rail values: power ratio = 1/r
  TxSpec tx;
  tx.laser.power_w = 1e-3;
  tx.laser.linewidth_hz = 0.0;
  tx.oversampling = 8;
  tx.mzm_bandwidth_hz = 1e12;  // effectively unfiltered
  tx.extinction_ratio_db = 13.0;
  tx.analog_full_scale = 1.0;

  const double baud = 10e9;
  const SampledWaveform hi =
      modulate(analog_stream(std::vector<double>(256, 1.0), baud), tx);
  const SampledWaveform lo =
      modulate(analog_stream(std::vector<double>(256, 0.0), baud), tx);
  CHECK(mean_power(hi) / mean_power(lo) ==
        doctest::Approx(std::pow(10.0, 1.3)).epsilon(1e-3));
  CHECK(mean_power(hi) == doctest::Approx(1e-3).epsilon(1e-3));
}

TEST_CASE("self-coherent output carries the configured carrier ratio") {
  TxSpec tx;
  tx.laser.power_w = 2e-3;
  tx.laser.linewidth_hz = 0.0;
  tx.oversampling = 8;
  tx.mzm_bandwidth_hz = 40e9;
  tx.cspr_db = 9.0;

  const SymbolStream s = generate_symbols(ModFormat::qam16, 4096, 50e9, 7);
  const SampledWaveform w = modulate(s, tx);

  cplx mean{0.0, 0.0};
  for (const cplx& v : w.samples) mean += v;
  mean /= static_cast<double>(w.size());
  double sig = 0.0;
  for (const cplx& v : w.samples) sig += std::norm(v - mean);
  sig /= static_cast<double>(w.size());
  const double cspr_db = 10.0 * std::log10(std::norm(mean) / sig);
  CHECK(cspr_db == doctest::Approx(9.0).epsilon(0.05));
  CHECK(mean_power(w) == doctest::Approx(2e-3).epsilon(0.02));
}

TEST_CASE("modulated length is symbols times oversampling") {
  TxSpec tx;
  tx.oversampling = 4;
  const SymbolStream s = generate_symbols(ModFormat::pam4, 1024, 100e9, 8);
  const SampledWaveform w = modulate(s, tx);
  CHECK(w.size() == 4096);
  CHECK(w.sample_rate == doctest::Approx(400e9));
}

TEST_CASE("continuous-wave laser has a Lorentzian phase walk") {
  LaserSpec spec;
  spec.power_w = 1.5e-3;
  spec.linewidth_hz = 50e6;
  spec.seed = 21;
  const double fs = 10e9;
  const SampledWaveform w = laser_field(spec, 65536 / fs, fs);

  double var = 0.0;
  for (std::size_t i = 1; i < w.size(); ++i) {
    CHECK(std::abs(std::abs(w.samples[i]) - std::sqrt(1.5e-3)) < 1e-12);
    const double d = std::arg(w.samples[i] / w.samples[i - 1]);
    var += d * d;
  }
  var /= static_cast<double>(w.size() - 1);
  CHECK(var == doctest::Approx(2.0 * M_PI * 50e6 / fs).epsilon(0.05));
}

TEST_CASE("rate-equation laser settles to the requested mean power") {
  LaserSpec spec;
  spec.mode = LaserSpec::Mode::lang_kobayashi;
  spec.power_w = 1e-3;
  spec.seed = 3;
  const double fs = 50e9;
  const SampledWaveform w = laser_field(spec, 8192 / fs, fs);
  CHECK(w.size() == 8192);
  CHECK(mean_power(w) == doctest::Approx(1e-3).epsilon(1e-6));
  for (const cplx& v : w.samples) CHECK(std::isfinite(std::abs(v)));
}

TEST_CASE("relaxation oscillations show up in the raw rate equations") {
  LkParams p;
  p.noise = false;
  const LkTrace tr = integrate_lang_kobayashi(p, 20e-9, 1e-12, 4);
  REQUIRE(!tr.field.empty());
  // active laser: steady photon number well above zero, carriers clamped
  // near threshold by gain saturation
  const std::size_t tail = tr.field.size() / 2;
  double mean_ph = 0.0;
  for (std::size_t i = tail; i < tr.field.size(); ++i)
    mean_ph += std::norm(tr.field[i]);
  mean_ph /= static_cast<double>(tr.field.size() - tail);
  CHECK(mean_ph > 0.0);
  CHECK(std::isfinite(mean_ph));
  CHECK(tr.carriers.back() > p.transparency_number);
}
