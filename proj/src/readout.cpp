#include "nvdnp/readout.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <numbers>

#include <Eigen/Dense>
#include <fftw3.h>
#include <fmt/format.h>

#include "nvdnp/errors.hpp"
#include "nvdnp/simd/kernels.hpp"

namespace nvdnp {
namespace {

constexpr std::array<int, 3> kLineOrder{+1, 0, -1};

double lineshape_value(Lineshape shape, double x) {
  switch (shape) {
    case Lineshape::kLorentzian: return 1.0 / (1.0 + x * x);
    case Lineshape::kGaussian: return std::exp(-std::numbers::ln2 * x * x);
    case Lineshape::kLorentzianMagnitude: return 1.0 / std::sqrt(1.0 + x * x);
  }
  return 0.0;
}

const char* kind_name(SpectrumKind kind) { return kind == SpectrumKind::kEsr ? "esr" : "ramsey_fft"; }

const char* lineshape_name(Lineshape shape) {
  switch (shape) {
    case Lineshape::kLorentzian: return "lorentzian";
    case Lineshape::kGaussian: return "gaussian";
    case Lineshape::kLorentzianMagnitude: return "lorentzian_magnitude";
  }
  return "?";
}

// Dips are read as depth below the unit baseline, FFT lines as magnitude.
std::vector<double> line_signal(const SpectrumTrace& s) {
  std::vector<double> y = s.amplitudes();
  if (s.metadata().kind == SpectrumKind::kEsr) {
    for (double& v : y) v = 1.0 - v;
  }
  return y;
}

bool is_power_of_two(std::size_t n) { return n >= 2 && std::has_single_bit(n); }

double interpolate(const std::vector<double>& f, const std::vector<double>& y, double at) {
  const auto it = std::lower_bound(f.begin(), f.end(), at);
  auto k = static_cast<std::size_t>(it - f.begin());
  if (k == f.size()) k = f.size() - 1;
  if (k > 0 && at - f[k - 1] < f[k] - at) --k;
  k = std::clamp<std::size_t>(k, 1, f.size() - 2);
  const double h = 0.5 * (f[k + 1] - f[k - 1]);
  const double x = (at - f[k]) / h;
  return y[k] + 0.5 * x * (y[k + 1] - y[k - 1]) + 0.5 * x * x * (y[k + 1] - 2.0 * y[k] + y[k - 1]);
}

// Complex one-sided FFT bin of a unit cosine at f_line decaying at `decay`
// (1/us), sampled n times at `dwell`; same 2/n scaling as fft_spectrum.
std::complex<double> damped_cosine_bin(double f_line, double f_bin, double decay, double dwell, std::size_t n) {
  auto geometric = [&](double detuning) {
    const std::complex<double> a = std::exp(std::complex<double>(-decay * dwell, 2.0 * std::numbers::pi * detuning * dwell));
    const std::complex<double> denom = 1.0 - a;
    if (std::abs(denom) < 1e-300) return std::complex<double>(static_cast<double>(n), 0.0);
    return (1.0 - std::pow(a, static_cast<double>(n))) / denom;
  };
  return (geometric(f_line - f_bin) + geometric(-f_line - f_bin)) / static_cast<double>(n);
}

// Magnitudes of overlapping tones do not add, so a Ramsey trace is fitted
// with the coherent sum of the three tones over the bins around each line;
// the weights stay nonnegative, which keeps the fit out of sign-flipped minima.
Eigen::Vector3d refine_ramsey(const SpectrumTrace& spectrum, const std::array<double, 3>& lines,
                              Eigen::Vector3d weights) {
  const auto& f = spectrum.frequencies();
  const auto& y = spectrum.amplitudes();
  const std::size_t n = 2 * (f.size() - 1);
  const double df = f[1] - f[0];
  const double dwell = 1.0 / (static_cast<double>(n) * df);
  const double decay = std::numbers::pi * spectrum.metadata().linewidth_mhz;

  std::vector<std::size_t> bins;
  for (double line : lines) {
    const auto centre = static_cast<std::ptrdiff_t>(std::lround(line / df));
    for (std::ptrdiff_t k = centre - 2; k <= centre + 2; ++k) {
      if (k >= 1 && k + 1 < static_cast<std::ptrdiff_t>(f.size())) bins.push_back(static_cast<std::size_t>(k));
    }
  }
  std::sort(bins.begin(), bins.end());
  bins.erase(std::unique(bins.begin(), bins.end()), bins.end());
  if (bins.size() < 3) return weights;

  Eigen::MatrixXcd model(static_cast<Eigen::Index>(bins.size()), 3);
  Eigen::VectorXd observed(static_cast<Eigen::Index>(bins.size()));
  for (std::size_t r = 0; r < bins.size(); ++r) {
    observed(static_cast<Eigen::Index>(r)) = y[bins[r]];
    for (int j = 0; j < 3; ++j) {
      model(static_cast<Eigen::Index>(r), j) =
          damped_cosine_bin(lines[static_cast<std::size_t>(j)], f[bins[r]], decay, dwell, n);
    }
  }

  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXcd z = model * weights.cast<std::complex<double>>();
    Eigen::MatrixXd jacobian(z.size(), 3);
    Eigen::VectorXd residual(z.size());
    for (Eigen::Index r = 0; r < z.size(); ++r) {
      const double mag = std::max(std::abs(z(r)), 1e-300);
      residual(r) = observed(r) - mag;
      for (int j = 0; j < 3; ++j) jacobian(r, j) = (std::conj(z(r)) * model(r, j)).real() / mag;
    }
    const Eigen::Vector3d step = jacobian.colPivHouseholderQr().solve(residual);
    weights = (weights + step).cwiseMax(0.0);
    if (step.cwiseAbs().maxCoeff() < 1e-14) break;
  }
  return weights;
}

}  // namespace

SpectrumTrace::SpectrumTrace(std::vector<double> frequencies_mhz, std::vector<double> amplitudes,
                             SpectrumMetadata metadata)
    : frequencies_(std::move(frequencies_mhz)), amplitudes_(std::move(amplitudes)), metadata_(std::move(metadata)) {
  if (frequencies_.size() != amplitudes_.size()) {
    throw ValidationError(fmt::format("spectrum has {} frequencies but {} amplitudes", frequencies_.size(),
                                      amplitudes_.size()));
  }
  for (std::size_t i = 1; i < frequencies_.size(); ++i) {
    if (!(frequencies_[i] > frequencies_[i - 1])) {
      throw ValidationError(fmt::format("spectrum frequencies not strictly increasing at index {}", i));
    }
  }
}

void EsrConfig::validate() const {
  if (!(f_max_mhz > f_min_mhz)) throw ValidationError("ESR range needs f_max > f_min");
  if (n_points < 3) throw ValidationError(fmt::format("ESR needs at least 3 points, got {}", n_points));
  if (!(linewidth_mhz > 0.0)) throw ValidationError("ESR linewidth must be > 0");
  if (!(contrast >= 0.0 && contrast <= 1.0)) throw ValidationError("ESR contrast must lie in [0, 1]");
}

std::array<double, 3> esr_line_frequencies(const SpinSystem& system) {
  std::array<double, 3> lines{};
  for (std::size_t i = 0; i < 3; ++i) {
    const int m = kLineOrder[i];
    lines[i] = transition_frequency(system, Transition::mw({0, m}, {-1, m}));
  }
  return lines;
}

EsrConfig esr_window(const SpinSystem& system, double half_span_mhz, int n_points) {
  const double center = esr_line_frequencies(system)[1];
  EsrConfig cfg;
  cfg.f_min_mhz = center - half_span_mhz;
  cfg.f_max_mhz = center + half_span_mhz;
  cfg.n_points = n_points;
  return cfg;
}

SpectrumTrace synthesize_esr(const SpinFractions& fractions, const SpinSystem& system, const EsrConfig& config) {
  config.validate();
  if (std::abs(fractions.sum() - 1.0) > 1e-6) {
    throw ValidationError(fmt::format("nuclear fractions sum to {}, expected 1", fractions.sum()));
  }
  const auto n = static_cast<std::size_t>(config.n_points);
  std::vector<double> freqs(n);
  const double step = (config.f_max_mhz - config.f_min_mhz) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) freqs[i] = config.f_min_mhz + step * static_cast<double>(i);
  freqs.back() = config.f_max_mhz;

  const std::array<double, 3> lines = esr_line_frequencies(system);
  const double hwhm = 0.5 * config.linewidth_mhz;
  std::vector<double> depth(n, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    const double weight = fractions.at(kLineOrder[i]);
    if (config.lineshape == Lineshape::kLorentzian) {
      simd::add_lorentzian(freqs, depth, lines[i], hwhm, weight);
    } else {
      for (std::size_t k = 0; k < n; ++k) depth[k] += weight * lineshape_value(config.lineshape, (freqs[k] - lines[i]) / hwhm);
    }
  }
  std::vector<double> signal(n);
  for (std::size_t k = 0; k < n; ++k) signal[k] = 1.0 - config.contrast * depth[k];

  SpectrumMetadata meta{SpectrumKind::kEsr, config.lineshape, config.linewidth_mhz, config.contrast, {}};
  if (std::none_of(lines.begin(), lines.end(),
                   [&](double f) { return f >= config.f_min_mhz && f <= config.f_max_mhz; })) {
    meta.warnings.push_back(fmt::format("no hyperfine line inside [{}, {}] MHz", config.f_min_mhz, config.f_max_mhz));
  }
  return SpectrumTrace(std::move(freqs), std::move(signal), std::move(meta));
}

void RamseyConfig::validate(const SpinSystem& system) const {
  if (!(dwell_us > 0.0) || !std::isfinite(dwell_us)) throw ValidationError("Ramsey dwell must be > 0");
  if (!(dephasing_time_us > 0.0)) throw ValidationError("Ramsey T2* must be > 0");
  if (n_points < 2 || !std::has_single_bit(static_cast<unsigned>(n_points))) {
    throw ValidationError(fmt::format("Ramsey n_points must be a power of two >= 2, got {}", n_points));
  }
  const double a = system.hyperfine_mhz;
  const double nyquist = 0.5 / dwell_us;
  if (!(std::abs(detuning_mhz) + a < nyquist)) {
    throw ValidationError(fmt::format("Ramsey tones up to {} MHz alias past Nyquist {} MHz",
                                      std::abs(detuning_mhz) + a, nyquist));
  }
  if (!(detuning_mhz > a)) {
    throw ValidationError(fmt::format("Ramsey detuning {} MHz must exceed the hyperfine splitting {} MHz",
                                      detuning_mhz, a));
  }
}

std::array<double, 3> ramsey_line_frequencies(const SpinSystem& system, const RamseyConfig& config) {
  std::array<double, 3> lines{};
  for (std::size_t i = 0; i < 3; ++i) lines[i] = config.detuning_mhz + system.hyperfine_mhz * kLineOrder[i];
  return lines;
}

std::vector<double> synthesize_ramsey(const SpinFractions& fractions, const SpinSystem& system,
                                      const RamseyConfig& config) {
  config.validate(system);
  const double decay = std::isinf(config.dephasing_time_us) ? 0.0 : 1.0 / config.dephasing_time_us;
  std::vector<double> signal(static_cast<std::size_t>(config.n_points), 0.0);
  const std::array<double, 3> tones = ramsey_line_frequencies(system, config);
  for (std::size_t i = 0; i < 3; ++i) {
    const double weight = fractions.at(kLineOrder[i]);
    if (weight != 0.0) simd::add_damped_cosine(signal, config.dwell_us, tones[i], decay, weight);
  }
  return signal;
}

std::vector<std::complex<double>> fft(std::span<const std::complex<double>> input) {
  const std::size_t n = input.size();
  if (!is_power_of_two(n)) throw ValidationError(fmt::format("FFT size {} is not a power of two >= 2", n));
  std::vector<std::complex<double>> in(input.begin(), input.end());
  std::vector<std::complex<double>> out(n);
  auto* in_ptr = reinterpret_cast<fftw_complex*>(in.data());
  auto* out_ptr = reinterpret_cast<fftw_complex*>(out.data());
  // Only fftw_execute is thread-safe; planning and cleanup are serialized.
  static std::mutex planner;
  fftw_plan plan = nullptr;
  {
    const std::lock_guard lock(planner);
    plan = fftw_plan_dft_1d(static_cast<int>(n), in_ptr, out_ptr, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw std::runtime_error("FFTW could not plan the transform");
  fftw_execute(plan);
  const std::lock_guard lock(planner);
  fftw_destroy_plan(plan);
  return out;
}

SpectrumTrace fft_spectrum(std::span<const double> signal, double dwell_us) {
  if (!(dwell_us > 0.0)) throw ValidationError("dwell must be > 0");
  const std::size_t n = signal.size();
  if (!is_power_of_two(n)) throw ValidationError(fmt::format("signal length {} is not a power of two >= 2", n));
  std::vector<std::complex<double>> in(signal.begin(), signal.end());
  const std::vector<std::complex<double>> spectrum = fft(in);

  const std::size_t bins = n / 2 + 1;
  std::vector<double> amps(bins);
  simd::magnitude(std::span(spectrum.data(), bins), amps);
  const double scale = 2.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < bins; ++k) amps[k] *= (k == 0 || k == n / 2) ? 0.5 * scale : scale;

  std::vector<double> freqs(bins);
  const double df = 1.0 / (static_cast<double>(n) * dwell_us);
  for (std::size_t k = 0; k < bins; ++k) freqs[k] = df * static_cast<double>(k);
  SpectrumMetadata meta{SpectrumKind::kRamseyFft, Lineshape::kLorentzianMagnitude, 0.0, 0.0, {}};
  return SpectrumTrace(std::move(freqs), std::move(amps), std::move(meta));
}

SpectrumTrace ramsey_spectrum(const SpinFractions& fractions, const SpinSystem& system, const RamseyConfig& config) {
  const std::vector<double> signal = synthesize_ramsey(fractions, system, config);
  SpectrumTrace raw = fft_spectrum(signal, config.dwell_us);
  SpectrumMetadata meta = raw.metadata();
  meta.linewidth_mhz = std::isinf(config.dephasing_time_us) ? 0.0 : 1.0 / (std::numbers::pi * config.dephasing_time_us);
  return SpectrumTrace(raw.frequencies(), raw.amplitudes(), std::move(meta));
}

double amplitude_at(const SpectrumTrace& spectrum, double frequency_mhz) {
  const auto& f = spectrum.frequencies();
  if (f.size() < 3) throw EstimationError("spectrum too short to interpolate");
  if (frequency_mhz < f.front() || frequency_mhz > f.back()) {
    throw EstimationError(fmt::format("line at {} MHz outside spectrum range [{}, {}] MHz", frequency_mhz, f.front(),
                                      f.back()));
  }
  return interpolate(f, line_signal(spectrum), frequency_mhz);
}

SpinFractions estimate_populations(const SpectrumTrace& spectrum, const std::array<double, 3>& expected_lines) {
  const SpectrumMetadata& meta = spectrum.metadata();
  const auto& f = spectrum.frequencies();
  if (f.size() < 3) throw EstimationError("spectrum too short to estimate populations");
  const std::vector<double> y = line_signal(spectrum);

  Eigen::Vector3d read;
  for (int i = 0; i < 3; ++i) {
    const double line = expected_lines[static_cast<std::size_t>(i)];
    if (line < f.front() || line > f.back()) {
      throw EstimationError(fmt::format("line at {} MHz outside spectrum range [{}, {}] MHz", line, f.front(), f.back()));
    }
    read(i) = interpolate(f, y, line);
  }

  Eigen::Vector3d weights = read;
  if (meta.linewidth_mhz > 0.0) {
    const double hwhm = 0.5 * meta.linewidth_mhz;
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        const double gap = std::abs(expected_lines[static_cast<std::size_t>(i)] - expected_lines[static_cast<std::size_t>(j)]);
        if (!(gap > meta.linewidth_mhz)) {
          throw EstimationError(fmt::format("lines {} and {} MHz are {} MHz apart, not resolved at linewidth {} MHz",
                                            expected_lines[static_cast<std::size_t>(i)],
                                            expected_lines[static_cast<std::size_t>(j)], gap, meta.linewidth_mhz));
        }
      }
    }
    Eigen::Matrix3d crosstalk;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double fi = expected_lines[static_cast<std::size_t>(i)];
        const double fj = expected_lines[static_cast<std::size_t>(j)];
        crosstalk(i, j) = lineshape_value(meta.lineshape, (fi - fj) / hwhm);
        // A real signal's FFT also carries the mirror line at -f_j.
        if (meta.kind == SpectrumKind::kRamseyFft) crosstalk(i, j) += lineshape_value(meta.lineshape, (fi + fj) / hwhm);
      }
    }
    weights = crosstalk.colPivHouseholderQr().solve(read);
    if (meta.kind == SpectrumKind::kRamseyFft && meta.lineshape == Lineshape::kLorentzianMagnitude &&
        f.size() >= 3 && f.front() == 0.0) {
      weights = refine_ramsey(spectrum, expected_lines, weights);
    }
  }
  for (int i = 0; i < 3; ++i) weights(i) = std::max(0.0, weights(i));
  const double total = weights.sum();
  if (!(total > 0.0)) throw EstimationError("no line amplitude at the expected frequencies");
  weights /= total;
  return {weights(0), weights(1), weights(2)};
}

std::vector<Peak> find_peaks(const SpectrumTrace& spectrum, std::size_t count) {
  const auto& f = spectrum.frequencies();
  const std::vector<double> y = line_signal(spectrum);
  std::vector<Peak> peaks;
  for (std::size_t k = 1; k + 1 < y.size(); ++k) {
    if (!(y[k] > y[k - 1] && y[k] >= y[k + 1])) continue;
    const double curvature = y[k - 1] - 2.0 * y[k] + y[k + 1];
    double offset = 0.0;
    if (curvature < 0.0) offset = 0.5 * (y[k - 1] - y[k + 1]) / curvature;
    const double h = 0.5 * (f[k + 1] - f[k - 1]);
    peaks.push_back({f[k] + offset * h, y[k] - 0.25 * (y[k - 1] - y[k + 1]) * offset});
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.amplitude > b.amplitude; });
  if (peaks.size() > count) peaks.resize(count);
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.frequency_mhz < b.frequency_mhz; });
  return peaks;
}

std::string to_csv(const SpectrumTrace& spectrum) {
  std::string out = "freq_mhz,amplitude\n";
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    out += fmt::format("{},{}\n", spectrum.frequencies()[i], spectrum.amplitudes()[i]);
  }
  return out;
}

nlohmann::json to_json(const SpectrumTrace& spectrum) {
  const SpectrumMetadata& m = spectrum.metadata();
  return {
      {"kind", kind_name(m.kind)},
      {"lineshape", lineshape_name(m.lineshape)},
      {"linewidth_mhz", m.linewidth_mhz},
      {"contrast", m.contrast},
      {"warnings", m.warnings},
      {"freq_mhz", spectrum.frequencies()},
      {"amplitude", spectrum.amplitudes()},
  };
}

}  // namespace nvdnp
