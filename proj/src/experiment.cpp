#include "nvdnp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "nvdnp/errors.hpp"
#include "nvdnp/seqlang.hpp"
#include "nvdnp/simd/kernels.hpp"
#include "nvdnp/toy_model.hpp"
#include "presets_data.hpp"

namespace nvdnp {
namespace {

constexpr int kMaxCycles = 1'000'000;
constexpr std::size_t kMaxSweepPoints = 100'000;

std::string num(double v) { return fmt::format("{}", v); }

[[noreturn]] void bad(const ConfigFile& f, const ConfigFile::Entry& e, const std::string& msg) {
  throw ValidationError(fmt::format("{}:{}: [{}] {}: {}", f.origin(), e.line, e.section, e.key, msg));
}

bool parse_bool(const ConfigFile& f, const ConfigFile::Entry& e) {
  const std::string& v = e.value;
  if (v == "true" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "no") return false;
  bad(f, e, fmt::format("expected true/false, found '{}'", v));
}

NuclearModel parse_model(const ConfigFile& f, const ConfigFile::Entry& e) {
  if (e.value == "walk") return NuclearModel::kRandomWalk;
  if (e.value == "flip") return NuclearModel::kSingleFlip;
  if (e.value == "hold") return NuclearModel::kHold;
  bad(f, e, fmt::format("expected walk, flip or hold, found '{}'", e.value));
}

std::string_view kind_name(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::kPt: return "pt";
    case ProtocolKind::kSe: return "se";
    case ProtocolKind::kSeq: return "seq";
  }
  return "?";
}

std::string_view lineshape_key(Lineshape s) { return s == Lineshape::kGaussian ? "gaussian" : "lorentzian"; }

// Settings that only resolve once the whole file has been read.
struct Pending {
  std::optional<double> kappa;
  std::optional<double> p_b;
  std::optional<double> repump_us;
  std::optional<double> p_a;
  std::optional<double> beta_pi;
  std::optional<std::string> seq_path;
};

using Handler = std::function<void(ExperimentConfig&, Pending&, const ConfigFile&, const ConfigFile::Entry&)>;

struct KeySpec {
  std::string_view section;
  std::string_view key;
  Handler handle;
};

template <typename F>
Handler number_into(F target) {
  return [target](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
    target(c) = parse_double(f, e);
  };
}

template <typename F>
Handler int_into(F target) {
  return [target](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
    target(c) = parse_int(f, e);
  };
}

template <typename F>
Handler bool_into(F target) {
  return [target](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
    target(c) = parse_bool(f, e);
  };
}

Handler axis(SweepVariable v) {
  return [v](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
    c.sweep.push_back({v, parse_axis(f, e)});
  };
}

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      {"run", "name", [](ExperimentConfig& c, Pending&, const ConfigFile&, const ConfigFile::Entry& e) { c.name = e.value; }},
      {"run", "workers",
       [](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
         const int w = parse_int(f, e);
         if (w < 1 || w > 256) bad(f, e, "workers must lie in [1, 256]");
         c.workers = static_cast<unsigned>(w);
       }},
      {"run", "seed",
       [](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
         std::uint64_t v = 0;
         const auto [ptr, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
         if (e.value.empty() || ec != std::errc() || ptr != e.value.data() + e.value.size()) {
           bad(f, e, fmt::format("expected an unsigned integer, found '{}'", e.value));
         }
         c.seed = v;
       }},
      {"run", "output_dir",
       [](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
         if (e.value.empty()) bad(f, e, "output_dir is empty");
         c.output_dir = e.value;
       }},

      {"system", "b_mt", number_into([](ExperimentConfig& c) -> double& { return c.system.b_field_mt; })},
      {"system", "zero_field_mhz", number_into([](ExperimentConfig& c) -> double& { return c.system.zero_field_splitting_mhz; })},
      {"system", "quadrupole_mhz", number_into([](ExperimentConfig& c) -> double& { return c.system.quadrupole_mhz; })},
      {"system", "hyperfine_mhz", number_into([](ExperimentConfig& c) -> double& { return c.system.hyperfine_mhz; })},
      {"system", "gamma_e_ghz_per_t", number_into([](ExperimentConfig& c) -> double& { return c.system.gamma_e_ghz_per_t; })},
      {"system", "gamma_n_mhz_per_t", number_into([](ExperimentConfig& c) -> double& { return c.system.gamma_n_mhz_per_t; })},

      {"optics", "pump_us", number_into([](ExperimentConfig& c) -> double& { return c.optics.pump.pump_duration_us; })},
      {"optics", "kappa_per_us",
       [](ExperimentConfig&, Pending& p, const ConfigFile& f, const ConfigFile::Entry& e) { p.kappa = parse_double(f, e); }},
      {"optics", "p_b",
       [](ExperimentConfig&, Pending& p, const ConfigFile& f, const ConfigFile::Entry& e) { p.p_b = parse_double(f, e); }},
      {"optics", "bias", number_into([](ExperimentConfig& c) -> double& { return c.optics.pump.flip_bias; })},
      {"optics", "efficiency", number_into([](ExperimentConfig& c) -> double& { return c.optics.pump.pump_efficiency; })},
      {"optics", "model",
       [](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
         c.optics.pump.nuclear_model = parse_model(f, e);
       }},
      {"optics", "repump_us",
       [](ExperimentConfig&, Pending& p, const ConfigFile& f, const ConfigFile::Entry& e) { p.repump_us = parse_double(f, e); }},
      {"optics", "repump_model",
       [](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
         c.optics.repump.nuclear_model = parse_model(f, e);
       }},

      {"protocol", "kind",
       [](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
         if (e.value == "pt") c.protocol.kind = ProtocolKind::kPt;
         else if (e.value == "se") c.protocol.kind = ProtocolKind::kSe;
         else if (e.value == "seq") c.protocol.kind = ProtocolKind::kSeq;
         else bad(f, e, fmt::format("expected pt, se or seq, found '{}'", e.value));
       }},
      {"protocol", "branch",
       [](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
         if (e.value == "minus") c.protocol.branch = PtBranch::kMinus;
         else if (e.value == "plus") c.protocol.branch = PtBranch::kPlus;
         else bad(f, e, fmt::format("expected minus or plus, found '{}'", e.value));
       }},
      {"protocol", "target", int_into([](ExperimentConfig& c) -> int& { return c.protocol.target_mi; })},
      {"protocol", "first_side", int_into([](ExperimentConfig& c) -> int& { return c.protocol.first_side; })},
      {"protocol", "cycles", int_into([](ExperimentConfig& c) -> int& { return c.protocol.cycles; })},
      {"protocol", "p_a",
       [](ExperimentConfig&, Pending& p, const ConfigFile& f, const ConfigFile::Entry& e) { p.p_a = parse_double(f, e); }},
      {"protocol", "beta_pi",
       [](ExperimentConfig&, Pending& p, const ConfigFile& f, const ConfigFile::Entry& e) { p.beta_pi = parse_double(f, e); }},
      {"protocol", "mw_angle_pi",
       [](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
         c.protocol.pulses.mw_angle = Angle::from_pi(parse_double(f, e));
       }},
      {"protocol", "selectivity",
       [](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
         if (e.value == "ideal") c.protocol.pulses.selectivity = Selectivity::kIdeal;
         else if (e.value == "rabi") c.protocol.pulses.selectivity = Selectivity::kRabi;
         else bad(f, e, fmt::format("expected ideal or rabi, found '{}'", e.value));
       }},
      {"protocol", "mw_rabi_mhz", number_into([](ExperimentConfig& c) -> double& { return c.protocol.pulses.mw_rabi_mhz; })},
      {"protocol", "rf_rabi_mhz", number_into([](ExperimentConfig& c) -> double& { return c.protocol.pulses.rf_rabi_mhz; })},
      {"protocol", "offset_mhz", number_into([](ExperimentConfig& c) -> double& { return c.protocol.pulses.carrier_offset_mhz; })},
      {"protocol", "resolution_mhz", number_into([](ExperimentConfig& c) -> double& { return c.protocol.pulses.resolution_mhz; })},
      {"protocol", "file",
       [](ExperimentConfig&, Pending& p, const ConfigFile&, const ConfigFile::Entry& e) { p.seq_path = e.value; }},
      {"protocol", "initial",
       [](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
         if (e.value == "optical") c.protocol.initial = InitialKind::kOpticallyInitialized;
         else if (e.value == "mixed") c.protocol.initial = InitialKind::kFullyMixed;
         else bad(f, e, fmt::format("expected optical or mixed, found '{}'", e.value));
       }},

      {"readout", "esr", bool_into([](ExperimentConfig& c) -> bool& { return c.readout.esr; })},
      {"readout", "ramsey", bool_into([](ExperimentConfig& c) -> bool& { return c.readout.ramsey; })},
      {"readout", "rf_off_reference", bool_into([](ExperimentConfig& c) -> bool& { return c.readout.rf_off_reference; })},
      {"readout", "esr_half_span_mhz", number_into([](ExperimentConfig& c) -> double& { return c.readout.esr_half_span_mhz; })},
      {"readout", "esr_points", int_into([](ExperimentConfig& c) -> int& { return c.readout.esr_points; })},
      {"readout", "linewidth_mhz", number_into([](ExperimentConfig& c) -> double& { return c.readout.linewidth_mhz; })},
      {"readout", "contrast", number_into([](ExperimentConfig& c) -> double& { return c.readout.contrast; })},
      {"readout", "lineshape",
       [](ExperimentConfig& c, Pending&, const ConfigFile& f, const ConfigFile::Entry& e) {
         if (e.value == "lorentzian") c.readout.lineshape = Lineshape::kLorentzian;
         else if (e.value == "gaussian") c.readout.lineshape = Lineshape::kGaussian;
         else bad(f, e, fmt::format("expected lorentzian or gaussian, found '{}'", e.value));
       }},
      {"readout", "ramsey_detuning_mhz", number_into([](ExperimentConfig& c) -> double& { return c.readout.ramsey_config.detuning_mhz; })},
      {"readout", "t2star_us", number_into([](ExperimentConfig& c) -> double& { return c.readout.ramsey_config.dephasing_time_us; })},
      {"readout", "dwell_us", number_into([](ExperimentConfig& c) -> double& { return c.readout.ramsey_config.dwell_us; })},
      {"readout", "ramsey_points", int_into([](ExperimentConfig& c) -> int& { return c.readout.ramsey_config.n_points; })},

      {"sweep", "cycles", axis(SweepVariable::kCycles)},
      {"sweep", "p_a", axis(SweepVariable::kPa)},
      {"sweep", "beta_pi", axis(SweepVariable::kBetaPi)},
      {"sweep", "pump_us", axis(SweepVariable::kPumpUs)},
      {"sweep", "b_mt", axis(SweepVariable::kBMt)},
  };
  return keys;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw std::runtime_error(fmt::format("error reading '{}'", path.string()));
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << content;
  out.close();
  if (!out) throw std::runtime_error(fmt::format("error writing '{}'", path.string()));
}

std::string csv_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string optional_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::vector<std::vector<double>> cartesian(const std::vector<SweepAxis>& axes) {
  std::vector<std::vector<double>> points{{}};
  for (const SweepAxis& a : axes) {
    std::vector<std::vector<double>> next;
    next.reserve(points.size() * a.values.size());
    for (const auto& p : points) {
      for (double v : a.values) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

std::size_t point_count(const std::vector<SweepAxis>& axes) {
  std::size_t n = 1;
  for (const SweepAxis& a : axes) {
    if (a.values.empty()) return 0;
    if (n > kMaxSweepPoints / a.values.size()) return kMaxSweepPoints + 1;
    n *= a.values.size();
  }
  return n;
}

void check_axis_value(SweepVariable v, double x) {
  const auto fail = [&](const char* what) {
    throw ValidationError(fmt::format("sweep {} value {} {}", axis_name(v), x, what));
  };
  switch (v) {
    case SweepVariable::kCycles:
      if (x != std::floor(x) || x < 1 || x > kMaxCycles) fail("must be an integer in [1, 1000000]");
      break;
    case SweepVariable::kPa:
      if (!(x >= 0.0 && x <= 1.0)) fail("must lie in [0, 1]");
      break;
    case SweepVariable::kBetaPi:
      if (!(x >= 0.0 && x <= 2.0)) fail("must lie in [0, 2]");
      break;
    case SweepVariable::kPumpUs:
    case SweepVariable::kBMt:
      if (!(x >= 0.0)) fail("must be >= 0");
      break;
  }
}

SpinFractions fractions_of(const DensityMatrix& s) { return s.nuclear_fractions(); }

double max_change(const SpinFractions& a, const SpinFractions& b) {
  return std::max({std::abs(a.plus - b.plus), std::abs(a.zero - b.zero), std::abs(a.minus - b.minus)});
}

ProtocolProgram repeated(const ProtocolProgram& cycle, int cycles) {
  if (cycle.repeat_count() > kMaxCycles * 1000 / cycles) throw ValidationError("total repeat count too large");
  return cycle.with_repeat_count(cycle.repeat_count() * cycles);
}

std::optional<double> engine_limit(const ProtocolProgram& cycle, DensityMatrix state, const SpinSystem& system,
                                   int target) {
  constexpr int kChunk = 50;
  constexpr int kMaxChunks = 4000;
  const ProtocolProgram chunk = repeated(cycle, kChunk);
  SpinFractions prev = fractions_of(state);
  for (int i = 0; i < kMaxChunks; ++i) {
    state = run_program(chunk, state, system).state;
    const SpinFractions now = fractions_of(state);
    if (max_change(prev, now) < 1e-13) return now.at(target);
    prev = now;
  }
  return std::nullopt;
}

SpectrumTrace esr_for(const ExperimentConfig& c, const SpinFractions& fractions) {
  EsrConfig cfg = esr_window(c.system, c.readout.esr_half_span_mhz, c.readout.esr_points);
  cfg.linewidth_mhz = c.readout.linewidth_mhz;
  cfg.contrast = c.readout.contrast;
  cfg.lineshape = c.readout.lineshape;
  return synthesize_esr(fractions, c.system, cfg);
}

nlohmann::json fractions_json(const SpinFractions& f) {
  return {{"p_plus1", f.plus}, {"p_0", f.zero}, {"p_minus1", f.minus}};
}

std::vector<std::tuple<std::string, std::string, std::string>> resolved_entries(const ExperimentConfig& c) {
  std::vector<std::tuple<std::string, std::string, std::string>> out;
  const auto add = [&](std::string s, std::string k, std::string v) { out.emplace_back(std::move(s), std::move(k), std::move(v)); };
  const auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  add("run", "name", c.name);
  add("run", "workers", std::to_string(c.workers));
  add("run", "seed", std::to_string(c.seed));
  add("run", "output_dir", c.output_dir.generic_string());
  const SpinSystem& s = c.system;
  add("system", "b_mt", num(s.b_field_mt));
  add("system", "zero_field_mhz", num(s.zero_field_splitting_mhz));
  add("system", "quadrupole_mhz", num(s.quadrupole_mhz));
  add("system", "hyperfine_mhz", num(s.hyperfine_mhz));
  add("system", "gamma_e_ghz_per_t", num(s.gamma_e_ghz_per_t));
  add("system", "gamma_n_mhz_per_t", num(s.gamma_n_mhz_per_t));
  const OpticalParams& p = c.optics.pump;
  add("optics", "pump_us", num(p.pump_duration_us));
  add("optics", "kappa_per_us", num(p.flip_rate_per_us));
  add("optics", "bias", num(p.flip_bias));
  add("optics", "efficiency", num(p.pump_efficiency));
  add("optics", "model", std::string(to_string(p.nuclear_model)));
  add("optics", "repump_us", num(c.optics.repump.pump_duration_us));
  add("optics", "repump_model", std::string(to_string(c.optics.repump.nuclear_model)));
  const ProtocolSettings& pr = c.protocol;
  add("protocol", "kind", std::string(kind_name(pr.kind)));
  add("protocol", "branch", pr.branch == PtBranch::kMinus ? "minus" : "plus");
  add("protocol", "target", std::to_string(pr.target_mi));
  add("protocol", "first_side", std::to_string(pr.first_side));
  add("protocol", "cycles", std::to_string(pr.cycles));
  add("protocol", "beta_pi", num(pr.pulses.rf_angle.pi_multiple()));
  add("protocol", "mw_angle_pi", num(pr.pulses.mw_angle.pi_multiple()));
  add("protocol", "selectivity", pr.pulses.selectivity == Selectivity::kRabi ? "rabi" : "ideal");
  add("protocol", "mw_rabi_mhz", num(pr.pulses.mw_rabi_mhz));
  add("protocol", "rf_rabi_mhz", num(pr.pulses.rf_rabi_mhz));
  add("protocol", "offset_mhz", num(pr.pulses.carrier_offset_mhz));
  add("protocol", "resolution_mhz", num(pr.pulses.resolution_mhz));
  if (pr.kind == ProtocolKind::kSeq) add("protocol", "file", pr.seq_file.generic_string());
  add("protocol", "initial", pr.initial == InitialKind::kFullyMixed ? "mixed" : "optical");
  const ReadoutSettings& r = c.readout;
  add("readout", "esr", flag(r.esr));
  add("readout", "ramsey", flag(r.ramsey));
  add("readout", "rf_off_reference", flag(r.rf_off_reference));
  add("readout", "esr_half_span_mhz", num(r.esr_half_span_mhz));
  add("readout", "esr_points", std::to_string(r.esr_points));
  add("readout", "linewidth_mhz", num(r.linewidth_mhz));
  add("readout", "contrast", num(r.contrast));
  add("readout", "lineshape", std::string(lineshape_key(r.lineshape)));
  add("readout", "ramsey_detuning_mhz", num(r.ramsey_config.detuning_mhz));
  add("readout", "t2star_us", num(r.ramsey_config.dephasing_time_us));
  add("readout", "dwell_us", num(r.ramsey_config.dwell_us));
  add("readout", "ramsey_points", std::to_string(r.ramsey_config.n_points));
  for (const SweepAxis& a : c.sweep) {
    std::string values;
    for (std::size_t i = 0; i < a.values.size(); ++i) values += (i ? ", " : "") + num(a.values[i]);
    add("sweep", std::string(axis_name(a.variable)), values);
  }
  return out;
}

std::string resolved_text(const ExperimentConfig& c) {
  std::string out;
  std::string section;
  for (const auto& [s, k, v] : resolved_entries(c)) {
    if (s != section) {
      out += fmt::format("{}[{}]\n", section.empty() ? "" : "\n", s);
      section = s;
    }
    out += fmt::format("{} = {}\n", k, v);
  }
  return out;
}

std::filesystem::path prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  return dir;
}

}  // namespace

std::string_view axis_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::kCycles: return "cycles";
    case SweepVariable::kPa: return "p_a";
    case SweepVariable::kBetaPi: return "beta_pi";
    case SweepVariable::kPumpUs: return "pump_us";
    case SweepVariable::kBMt: return "b_mt";
  }
  return "?";
}

ExperimentConfig config_from_text(std::string_view text, const std::filesystem::path& base_dir, std::string origin) {
  const ConfigFile file = ConfigFile::parse(text, std::move(origin));
  ExperimentConfig c;
  Pending pending;
  for (const ConfigFile::Entry& e : file.entries()) {
    const auto& keys = schema();
    const auto it = std::find_if(keys.begin(), keys.end(),
                                 [&](const KeySpec& k) { return k.section == e.section && k.key == e.key; });
    if (it == keys.end()) {
      const bool known_section = std::any_of(keys.begin(), keys.end(), [&](const KeySpec& k) { return k.section == e.section; });
      if (!known_section) bad(file, e, fmt::format("unknown section [{}]", e.section));
      bad(file, e, "unknown key");
    }
    it->handle(c, pending, file, e);
  }

  const auto where = [&](std::string_view s, std::string_view k) { return file.find(s, k); };
  if (pending.kappa && pending.p_b) bad(file, *where("optics", "p_b"), "give either kappa_per_us or p_b, not both");
  if (pending.kappa) c.optics.pump.flip_rate_per_us = *pending.kappa;
  if (pending.p_b) {
    try {
      c.optics.pump.flip_rate_per_us = flip_rate_for_probability(*pending.p_b, c.optics.pump.pump_duration_us);
    } catch (const std::exception& ex) {
      bad(file, *where("optics", "p_b"), ex.what());
    }
  }
  const NuclearModel repump_model = c.optics.repump.nuclear_model;
  const bool repump_model_given = where("optics", "repump_model") != nullptr;
  c.optics.repump = c.optics.pump;
  c.optics.repump.nuclear_model = repump_model_given ? repump_model : NuclearModel::kHold;
  c.optics.repump.pump_duration_us = pending.repump_us.value_or(c.optics.pump.pump_duration_us);

  if (pending.p_a && pending.beta_pi) bad(file, *where("protocol", "beta_pi"), "give either p_a or beta_pi, not both");
  if (pending.p_a) {
    try {
      c.protocol.pulses.rf_angle = rf_angle_for_flip_probability(*pending.p_a);
    } catch (const std::exception& ex) {
      bad(file, *where("protocol", "p_a"), ex.what());
    }
  }
  if (pending.beta_pi) c.protocol.pulses.rf_angle = Angle::from_pi(*pending.beta_pi);

  if (c.protocol.kind == ProtocolKind::kSeq) {
    if (!pending.seq_path) throw ValidationError(fmt::format("{}: protocol kind seq needs [protocol] file", file.origin()));
    std::filesystem::path p = *pending.seq_path;
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::is_regular_file(p)) {
      bad(file, *where("protocol", "file"), fmt::format("sequence file '{}' does not exist", p.string()));
    }
    c.protocol.seq_file = p.lexically_normal();
    c.protocol.seq_source = read_file(c.protocol.seq_file);
  } else if (pending.seq_path) {
    bad(file, *where("protocol", "file"), "file is only used with kind = seq");
  }

  for (std::size_t i = 0; i < c.sweep.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const bool rf_pair = (c.sweep[i].variable == SweepVariable::kPa && c.sweep[j].variable == SweepVariable::kBetaPi) ||
                           (c.sweep[i].variable == SweepVariable::kBetaPi && c.sweep[j].variable == SweepVariable::kPa);
      if (rf_pair) throw ValidationError("sweep axes p_a and beta_pi both set the rf angle");
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_text(read_file(path), path.parent_path(), path.string());
}

void ExperimentConfig::validate() const {
  system.validate();
  optics.pump.validate();
  optics.repump.validate();
  if (workers < 1 || workers > 256) throw ValidationError("workers must lie in [1, 256]");
  if (protocol.cycles < 1 || protocol.cycles > kMaxCycles) {
    throw ValidationError(fmt::format("cycles must lie in [1, {}], got {}", kMaxCycles, protocol.cycles));
  }
  if (protocol.kind == ProtocolKind::kSeq && readout.rf_off_reference) {
    throw ValidationError("rf_off_reference needs a built-in protocol (pt or se)");
  }
  if (!(readout.esr_half_span_mhz > 0.0)) throw ValidationError("esr_half_span_mhz must be > 0");
  if (readout.esr) esr_for(*this, SpinFractions{1.0 / 3, 1.0 / 3, 1.0 / 3});
  if (readout.ramsey) readout.ramsey_config.validate(system);

  const std::size_t n = point_count(sweep);
  if (!sweep.empty() && n == 0) throw ValidationError("a sweep axis is empty");
  if (n > kMaxSweepPoints) throw ValidationError(fmt::format("sweep has more than {} points", kMaxSweepPoints));
  for (const SweepAxis& a : sweep) {
    if (a.values.empty()) throw ValidationError(fmt::format("sweep axis {} is empty", axis_name(a.variable)));
    for (double v : a.values) check_axis_value(a.variable, v);
  }
  // Build every program up front so unresolvable lines fail before any work.
  if (sweep.empty()) {
    build_cycle(*this);
  } else {
    for (const auto& point : cartesian(sweep)) {
      const ExperimentConfig c = apply_point(*this, point);
      c.system.validate();
      c.optics.pump.validate();
      build_cycle(c);
    }
  }
}

ExperimentConfig apply_point(const ExperimentConfig& config, const std::vector<double>& point) {
  if (point.size() != config.sweep.size()) {
    throw ValidationError(fmt::format("sweep point has {} values for {} axes", point.size(), config.sweep.size()));
  }
  ExperimentConfig c = config;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double v = point[i];
    check_axis_value(config.sweep[i].variable, v);
    switch (config.sweep[i].variable) {
      case SweepVariable::kCycles: c.protocol.cycles = static_cast<int>(v); break;
      case SweepVariable::kPa: c.protocol.pulses.rf_angle = rf_angle_for_flip_probability(v); break;
      case SweepVariable::kBetaPi: c.protocol.pulses.rf_angle = Angle::from_pi(v); break;
      case SweepVariable::kPumpUs: c.optics.pump.pump_duration_us = v; break;
      case SweepVariable::kBMt: c.system.b_field_mt = v; break;
    }
  }
  return c;
}

ProtocolProgram build_cycle(const ExperimentConfig& config) {
  switch (config.protocol.kind) {
    case ProtocolKind::kPt: {
      PtSpec spec;
      spec.branch = config.protocol.branch;
      spec.target_mi = config.protocol.target_mi;
      spec.first_side = config.protocol.first_side;
      spec.pump = config.optics.pump;
      spec.repump = config.optics.repump;
      spec.pulses = config.protocol.pulses;
      return build_pt_program(config.system, spec);
    }
    case ProtocolKind::kSe:
      return build_se_program(config.system, config.protocol.pulses);
    case ProtocolKind::kSeq: {
      seq::ParseOptions options;
      options.laser_calibration = config.optics.pump;
      return seq::parse_program(config.protocol.seq_source, options);
    }
  }
  throw ValidationError("unknown protocol kind");
}

PointResult evaluate(const ExperimentConfig& config) {
  const ProtocolProgram cycle = build_cycle(config);
  const RunResult run =
      run_program(repeated(cycle, config.protocol.cycles), initial_state(config.protocol.initial), config.system);
  PointResult r;
  r.final_state = run.state.nuclear_fractions();
  if (config.protocol.kind == ProtocolKind::kPt) {
    const int target = config.protocol.target_mi;
    r.target_limit = engine_limit(cycle, run.state, config.system, target);
    try {
      r.target_limit_toy = toy::limit_population(flip_probability_for_rf_angle(config.protocol.pulses.rf_angle),
                                                 effective_flip_probability(config.optics.pump));
    } catch (const ValidationError&) {
    }
  }
  return r;
}

std::string result_header() { return "p_plus1,p_0,p_minus1,p_target_lim,p_target_lim_toy"; }

std::string result_row(const PointResult& r) {
  return fmt::format("{},{},{},{},{}", num(r.final_state.plus), num(r.final_state.zero), num(r.final_state.minus),
                     optional_num(r.target_limit), optional_num(r.target_limit_toy));
}

std::string SweepTable::to_csv() const {
  std::string out;
  for (const std::string& a : axes) out += a + ",";
  out += result_header() + "\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (double v : points[i]) out += num(v) + ",";
    out += result_row(results[i]) + "\n";
  }
  return out;
}

nlohmann::json SweepTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    nlohmann::json row;
    for (std::size_t k = 0; k < axes.size(); ++k) row[axes[k]] = points[i][k];
    row.update(fractions_json(results[i].final_state));
    row["p_target_lim"] = results[i].target_limit ? nlohmann::json(*results[i].target_limit) : nlohmann::json();
    row["p_target_lim_toy"] = results[i].target_limit_toy ? nlohmann::json(*results[i].target_limit_toy) : nlohmann::json();
    rows.push_back(std::move(row));
  }
  return {{"axes", axes}, {"rows", rows}};
}

SweepTable sweep(const ExperimentConfig& config) {
  if (config.sweep.empty()) throw ValidationError("no [sweep] axes configured");
  config.validate();
  SweepTable table;
  for (const SweepAxis& a : config.sweep) table.axes.emplace_back(axis_name(a.variable));
  table.points = cartesian(config.sweep);
  table.results.resize(table.points.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (std::size_t i = next++; i < table.points.size(); i = next++) {
      try {
        table.results[i] = evaluate(apply_point(config, table.points[i]));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = table.points.size();
      }
    }
  };
  const unsigned n_workers = std::min<unsigned>(config.workers, static_cast<unsigned>(table.points.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
  return table;
}

nlohmann::json manifest(const ExperimentConfig& config, std::string_view verb) {
  nlohmann::json resolved;
  for (const auto& [s, k, v] : resolved_entries(config)) resolved[s][k] = v;
  nlohmann::json derived = {
      {"pump_p_b", effective_flip_probability(config.optics.pump)},
      {"repump_p_b", effective_flip_probability(config.optics.repump)},
      {"p_a", flip_probability_for_rf_angle(config.protocol.pulses.rf_angle)},
      {"esr_line_frequencies_mhz", esr_line_frequencies(config.system)},
  };
  return {
      {"tool", "nvdnp"},
      {"version", std::string(kToolVersion)},
      {"verb", std::string(verb)},
      {"name", config.name},
      {"seed", config.seed},
      {"simd_backend", std::string(simd::backend_name(simd::active_backend()))},
      {"config", resolved},
      {"derived", derived},
  };
}

RunOutputs run_experiment(const ExperimentConfig& config) {
  config.validate();
  const ProtocolProgram cycle = build_cycle(config);
  const DensityMatrix start = initial_state(config.protocol.initial);
  const RunResult run = run_program(repeated(cycle, config.protocol.cycles), start, config.system);
  const PointResult point = evaluate(config);
  const std::vector<SpinFractions> series = run_recursive_series(cycle, start, config.system, config.protocol.cycles);

  std::optional<PointResult> reference;
  if (config.readout.rf_off_reference) {
    ExperimentConfig off = config;
    off.protocol.pulses.rf_angle = Angle::from_pi(0.0);
    reference = evaluate(off);
  }

  const std::filesystem::path dir = prepare_dir(config.output_dir);
  RunOutputs out;
  const auto emit = [&](const std::string& name, std::string_view content) {
    write_file(dir / name, content);
    out.files.push_back(dir / name);
  };

  emit("result.csv", result_header() + "\n" + result_row(point) + "\n");

  std::string series_csv = "cycle,p_plus1,p_0,p_minus1\n";
  for (std::size_t n = 0; n < series.size(); ++n) {
    series_csv += fmt::format("{},{},{},{}\n", n, num(series[n].plus), num(series[n].zero), num(series[n].minus));
  }
  emit("series.csv", series_csv);

  std::string trace_csv = "step,cycle,instruction,p_plus1,p_0,p_minus1,trace_drift,warnings\n";
  for (const TraceEntry& e : run.trace.entries) {
    std::string warnings;
    for (const std::string& w : e.warnings) warnings += (warnings.empty() ? "" : "; ") + w;
    trace_csv += fmt::format("{},{},{},{},{},{},{},{}\n", e.step, e.cycle, csv_quote(e.instruction), num(e.nuclear.plus),
                             num(e.nuclear.zero), num(e.nuclear.minus), num(e.trace_drift), csv_quote(warnings));
  }
  emit("trace.csv", trace_csv);
  out.warnings = run.trace.warning_count();

  const auto emit_spectrum = [&](const std::string& stem, const SpectrumTrace& spectrum, const SpinFractions& truth,
                                 const std::array<double, 3>& lines) {
    emit(stem + ".csv", to_csv(spectrum));
    nlohmann::json j = to_json(spectrum);
    j["nuclear_fractions"] = fractions_json(truth);
    j["line_frequencies_mhz"] = lines;
    try {
      j["estimated_fractions"] = fractions_json(estimate_populations(spectrum, lines));
    } catch (const EstimationError& e) {
      j["estimated_fractions"] = nullptr;
      j["estimation_error"] = e.what();
    }
    emit(stem + ".json", j.dump(2) + "\n");
  };
  if (config.readout.esr) {
    const auto lines = esr_line_frequencies(config.system);
    emit_spectrum("esr", esr_for(config, point.final_state), point.final_state, lines);
    if (reference) emit_spectrum("esr_rf_off", esr_for(config, reference->final_state), reference->final_state, lines);
  }
  if (config.readout.ramsey) {
    const auto lines = ramsey_line_frequencies(config.system, config.readout.ramsey_config);
    emit_spectrum("ramsey", ramsey_spectrum(point.final_state, config.system, config.readout.ramsey_config),
                  point.final_state, lines);
    if (reference) {
      emit_spectrum("ramsey_rf_off",
                    ramsey_spectrum(reference->final_state, config.system, config.readout.ramsey_config),
                    reference->final_state, lines);
    }
  }

  emit("resolved.ini", resolved_text(config));
  nlohmann::json m = manifest(config, "run");
  m["warnings"] = out.warnings;
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : out.files) files.push_back(f.filename().string());
  m["outputs"] = files;
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  out.files.push_back(dir / "manifest.json");
  return out;
}

RunOutputs run_sweep(const ExperimentConfig& config) {
  const SweepTable table = sweep(config);
  const std::filesystem::path dir = prepare_dir(config.output_dir);
  RunOutputs out;
  write_file(dir / "sweep.csv", table.to_csv());
  write_file(dir / "sweep.json", table.to_json().dump(2) + "\n");
  write_file(dir / "resolved.ini", resolved_text(config));
  nlohmann::json m = manifest(config, "sweep");
  m["points"] = table.points.size();
  m["outputs"] = {"sweep.csv", "sweep.json", "resolved.ini"};
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  for (const char* f : {"sweep.csv", "sweep.json", "resolved.ini", "manifest.json"}) out.files.push_back(dir / f);
  return out;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : detail::preset_table()) names.emplace_back(name);
  return names;
}

std::string_view preset_text(std::string_view name) {
  for (const auto& [n, text] : detail::preset_table()) {
    if (n == name) return text;
  }
  throw ValidationError(fmt::format("unknown preset '{}'", name));
}

ExperimentConfig load_preset(std::string_view name) {
  return config_from_text(preset_text(name), std::filesystem::current_path(), fmt::format("preset:{}", name));
}

}  // namespace nvdnp
