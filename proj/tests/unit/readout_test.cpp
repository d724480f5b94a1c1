#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nvdnp/errors.hpp"
#include "nvdnp/readout.hpp"
#include "oracles.hpp"

using namespace nvdnp;

namespace {

std::vector<SpinFractions> simplex_grid(double step) {
  std::vector<SpinFractions> out;
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; i + j <= n; ++j) {
      const double a = i * step;
      const double b = j * step;
      out.push_back({a, b, std::max(0.0, 1.0 - a - b)});
    }
  }
  return out;
}

}  // namespace

TEST(Fft, MatchesNaiveDft) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t n : {2u, 4u, 8u, 64u, 256u, 1024u}) {
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {g(rng), g(rng)};
    const auto fast = fft(x);
    const auto slow = oracle::dft(x);
    double worst = 0;
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(fast[k] - slow[k]));
    EXPECT_LT(worst, 1e-9 * static_cast<double>(n)) << n;
  }
}

TEST(Fft, RejectsNonPowerOfTwo) {
  std::vector<std::complex<double>> x(12);
  EXPECT_THROW(fft(x), ValidationError);
  std::vector<std::complex<double>> one(1);
  EXPECT_THROW(fft(one), ValidationError);
}

TEST(Fft, BinCentredCosineReadsItsAmplitude) {
  const std::size_t n = 256;
  const double dwell = 0.01;
  std::vector<double> s(n);
  for (std::size_t k = 0; k < n; ++k) {
    s[k] = 0.2 + 0.7 * std::cos(2 * M_PI * 20.0 * static_cast<double>(k) / static_cast<double>(n));
  }
  const SpectrumTrace t = fft_spectrum(s, dwell);
  ASSERT_EQ(t.size(), n / 2 + 1);
  EXPECT_NEAR(t.amplitudes()[0], 0.2, 1e-12);
  EXPECT_NEAR(t.amplitudes()[20], 0.7, 1e-12);
  EXPECT_NEAR(t.frequencies()[20], 20.0 / (n * dwell), 1e-12);
  EXPECT_NEAR(t.frequencies().back(), 0.5 / dwell, 1e-12);
}

TEST(Ramsey, SignalMatchesFormula) {
  const SpinSystem s;
  const RamseyConfig cfg;
  const SpinFractions f{0.2, 0.5, 0.3};
  const auto sig = synthesize_ramsey(f, s, cfg);
  ASSERT_EQ(sig.size(), static_cast<std::size_t>(cfg.n_points));
  for (std::size_t k = 0; k < sig.size(); ++k) {
    const double t = static_cast<double>(k) * cfg.dwell_us;
    double expected = 0;
    for (int m : {1, 0, -1}) {
      expected += f.at(m) * std::cos(2 * M_PI * (cfg.detuning_mhz + s.hyperfine_mhz * m) * t) *
                  std::exp(-t / cfg.dephasing_time_us);
    }
    ASSERT_NEAR(sig[k], expected, 1e-10) << k;
  }
}

TEST(Ramsey, ConfigValidation) {
  const SpinSystem s;
  RamseyConfig cfg;
  cfg.dwell_us = 0.1;  // Nyquist 5 MHz < 5 + 2.16
  EXPECT_THROW(cfg.validate(s), ValidationError);
  cfg = RamseyConfig{};
  cfg.detuning_mhz = 1.0;
  EXPECT_THROW(cfg.validate(s), ValidationError);
  cfg = RamseyConfig{};
  cfg.n_points = 1000;
  EXPECT_THROW(cfg.validate(s), ValidationError);
  cfg = RamseyConfig{};
  cfg.dephasing_time_us = 0;
  EXPECT_THROW(cfg.validate(s), ValidationError);
  EXPECT_NO_THROW(RamseyConfig{}.validate(s));
}

TEST(Ramsey, PeakSpacingIsHyperfine) {
  SpinSystem s;
  s.hyperfine_mhz = 2.2;
  const RamseyConfig cfg;
  const SpectrumTrace t = ramsey_spectrum({1.0 / 3, 1.0 / 3, 1.0 / 3}, s, cfg);
  const auto peaks = find_peaks(t, 3);
  ASSERT_EQ(peaks.size(), 3u);
  const double bin = t.frequencies()[1];
  EXPECT_NEAR(peaks[1].frequency_mhz - peaks[0].frequency_mhz, 2.2, bin);
  EXPECT_NEAR(peaks[2].frequency_mhz - peaks[1].frequency_mhz, 2.2, bin);
  EXPECT_NEAR(peaks[1].frequency_mhz, cfg.detuning_mhz, bin);
}

TEST(Ramsey, PopulationRoundTrip) {
  const SpinSystem s;
  const RamseyConfig cfg;
  const auto lines = ramsey_line_frequencies(s, cfg);
  for (const SpinFractions& f : simplex_grid(0.1)) {
    const SpinFractions e = estimate_populations(ramsey_spectrum(f, s, cfg), lines);
    EXPECT_NEAR(e.plus, f.plus, 1e-6);
    EXPECT_NEAR(e.zero, f.zero, 1e-6);
    EXPECT_NEAR(e.minus, f.minus, 1e-6);
  }
}

TEST(Esr, SpectrumMatchesFormula) {
  const SpinSystem s;
  const EsrConfig cfg = esr_window(s);
  const SpinFractions f{0.1, 0.75, 0.15};
  const SpectrumTrace t = synthesize_esr(f, s, cfg);
  ASSERT_EQ(t.size(), 2101u);
  EXPECT_NEAR(t.frequencies().front(), 2024.0, 1e-9);
  EXPECT_NEAR(t.frequencies().back(), 2034.5, 1e-9);
  const auto lines = esr_line_frequencies(s);
  for (std::size_t k = 0; k < t.size(); k += 37) {
    double depth = 0;
    for (int i = 0; i < 3; ++i) {
      const double x = (t.frequencies()[k] - lines[static_cast<std::size_t>(i)]) / 0.2;
      depth += f.at(1 - i) / (1 + x * x);
    }
    EXPECT_NEAR(t.amplitudes()[k], 1 - 0.3 * depth, 1e-12);
  }
  EXPECT_TRUE(t.metadata().warnings.empty());
}

TEST(Esr, RoundTripOverSimplex) {
  const SpinSystem s;
  const EsrConfig cfg = esr_window(s);
  const auto lines = esr_line_frequencies(s);
  for (Lineshape shape : {Lineshape::kLorentzian, Lineshape::kGaussian}) {
    EsrConfig c = cfg;
    c.lineshape = shape;
    for (const SpinFractions& f : simplex_grid(0.05)) {
      const SpinFractions e = estimate_populations(synthesize_esr(f, s, c), lines);
      EXPECT_NEAR(e.plus, f.plus, 0.01);
      EXPECT_NEAR(e.zero, f.zero, 0.01);
      EXPECT_NEAR(e.minus, f.minus, 0.01);
    }
  }
}

TEST(Esr, WarnsWhenNoLineInRange) {
  const SpinSystem s;
  EsrConfig cfg;
  cfg.f_min_mhz = 2500;
  cfg.f_max_mhz = 2510;
  const SpectrumTrace t = synthesize_esr({0, 1, 0}, s, cfg);
  EXPECT_EQ(t.metadata().warnings.size(), 1u);
  EXPECT_THROW(estimate_populations(t, esr_line_frequencies(s)), EstimationError);
}

TEST(Esr, UnresolvedLinesAreRejected) {
  const SpinSystem s;
  EsrConfig cfg = esr_window(s);
  cfg.linewidth_mhz = 3.0;
  EXPECT_THROW(estimate_populations(synthesize_esr({0, 1, 0}, s, cfg), esr_line_frequencies(s)), EstimationError);
}

TEST(Esr, ConfigValidation) {
  EsrConfig cfg;
  cfg.contrast = 1.5;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = EsrConfig{};
  cfg.n_points = 2;
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_THROW(synthesize_esr({0.5, 0.6, 0.0}, SpinSystem{}, EsrConfig{}), ValidationError);
}

TEST(Spectrum, TraceValidationAndSerialization) {
  EXPECT_THROW(SpectrumTrace({1, 1, 2}, {0, 0, 0}, {}), ValidationError);
  EXPECT_THROW(SpectrumTrace({1, 2}, {0}, {}), ValidationError);
  const SpectrumTrace t({1.0, 2.5}, {0.25, 1.0}, {});
  EXPECT_EQ(to_csv(t), "freq_mhz,amplitude\n1,0.25\n2.5,1\n");
  const nlohmann::json j = to_json(t);
  EXPECT_EQ(j["kind"], "esr");
  EXPECT_EQ(j["freq_mhz"].size(), 2u);
  EXPECT_EQ(j["amplitude"][0], 0.25);
}

TEST(Spectrum, AmplitudeAtInterpolatesQuadratics) {
  std::vector<double> f;
  std::vector<double> a;
  for (int i = 0; i < 11; ++i) {
    f.push_back(i * 0.1);
    a.push_back(1 - (0.3 - 0.2 * (i * 0.1 - 0.5) * (i * 0.1 - 0.5)));
  }
  const SpectrumTrace t(f, a, {});
  EXPECT_NEAR(amplitude_at(t, 0.537), 0.3 - 0.2 * 0.037 * 0.037, 1e-12);
  EXPECT_THROW(amplitude_at(t, 1.5), EstimationError);
}
