#pragma once

#include <array>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "nvdnp/density_matrix.hpp"
#include "nvdnp/spin_system.hpp"

namespace nvdnp {

enum class SpectrumKind { kEsr, kRamseyFft };

enum class Lineshape {
  kLorentzian,           // 1 / (1 + x^2)
  kGaussian,             // exp(-ln2 x^2)
  kLorentzianMagnitude,  // 1 / sqrt(1 + x^2), FFT magnitude of a decaying tone
};

struct SpectrumMetadata {
  SpectrumKind kind = SpectrumKind::kEsr;
  Lineshape lineshape = Lineshape::kLorentzian;
  double linewidth_mhz = 0.0;  // FWHM of the underlying line; 0 when unknown
  double contrast = 0.0;
  std::vector<std::string> warnings;
};

class SpectrumTrace {
 public:
  // Throws ValidationError unless sizes match and frequencies strictly increase.
  SpectrumTrace(std::vector<double> frequencies_mhz, std::vector<double> amplitudes,
                SpectrumMetadata metadata);

  const std::vector<double>& frequencies() const { return frequencies_; }
  const std::vector<double>& amplitudes() const { return amplitudes_; }
  const SpectrumMetadata& metadata() const { return metadata_; }
  std::size_t size() const { return frequencies_.size(); }

 private:
  std::vector<double> frequencies_;
  std::vector<double> amplitudes_;
  SpectrumMetadata metadata_;
};

struct EsrConfig {
  double f_min_mhz = 2024.0;
  double f_max_mhz = 2034.5;
  int n_points = 2101;
  double linewidth_mhz = 0.4;  // FWHM
  double contrast = 0.3;
  Lineshape lineshape = Lineshape::kLorentzian;

  void validate() const;
};

// Lines of |0, m_I> <-> |-1, m_I> ordered m_I = +1, 0, -1.
std::array<double, 3> esr_line_frequencies(const SpinSystem& system);

// ESR range centred on the |0> <-> |-1> group with the given half span.
EsrConfig esr_window(const SpinSystem& system, double half_span_mhz = 5.25, int n_points = 2101);

// S(f) = 1 - contrast sum_m P_m L(f - f_m).
SpectrumTrace synthesize_esr(const SpinFractions& fractions, const SpinSystem& system,
                             const EsrConfig& config);

struct RamseyConfig {
  double detuning_mhz = 5.0;
  double dephasing_time_us = 2.0;  // T2*; infinity disables decay
  double dwell_us = 0.025;
  int n_points = 1024;

  // Throws ValidationError, including aliasing of detuning + A past Nyquist.
  void validate(const SpinSystem& system) const;
};

// Tones at detuning + A m_I ordered m_I = +1, 0, -1.
std::array<double, 3> ramsey_line_frequencies(const SpinSystem& system, const RamseyConfig& config);

// s(t_k) = sum_m P_m cos(2 pi (detuning + A m) t_k) exp(-t_k / T2*).
std::vector<double> synthesize_ramsey(const SpinFractions& fractions, const SpinSystem& system,
                                      const RamseyConfig& config);

// In-place-free radix-2 transform; size must be a power of two.
std::vector<std::complex<double>> fft(std::span<const std::complex<double>> input);

// One-sided amplitude spectrum on 0..Nyquist: a cosine of amplitude a on a bin
// centre reads a. Metadata carries no linewidth.
SpectrumTrace fft_spectrum(std::span<const double> signal, double dwell_us);

// synthesize_ramsey followed by fft_spectrum, with lineshape metadata filled in.
SpectrumTrace ramsey_spectrum(const SpinFractions& fractions, const SpinSystem& system,
                              const RamseyConfig& config);

// Line amplitude (dip depth for ESR, magnitude for FFT) at an arbitrary
// frequency via a parabola through the three nearest samples.
double amplitude_at(const SpectrumTrace& spectrum, double frequency_mhz);

// Reads the three lines (ordered m_I = +1, 0, -1), removes the crosstalk
// implied by the trace lineshape and normalizes to unit sum. Throws
// EstimationError when a line is outside the trace or lines are not resolved.
SpinFractions estimate_populations(const SpectrumTrace& spectrum,
                                   const std::array<double, 3>& expected_lines);

struct Peak {
  double frequency_mhz = 0.0;
  double amplitude = 0.0;
};

// The `count` largest local maxima (dips for ESR), sorted by frequency, with
// parabolic refinement.
std::vector<Peak> find_peaks(const SpectrumTrace& spectrum, std::size_t count);

std::string to_csv(const SpectrumTrace& spectrum);
nlohmann::json to_json(const SpectrumTrace& spectrum);

}  // namespace nvdnp
