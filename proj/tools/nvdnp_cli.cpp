#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "nvdnp/errors.hpp"
#include "nvdnp/experiment.hpp"
#include "nvdnp/seqlang.hpp"
#include "nvdnp/simd/kernels.hpp"
#include "nvdnp/toy_model.hpp"

namespace {

constexpr int kRuntimeError = 1;
constexpr int kValidationError = 2;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A path that does not exist is taken as a preset name.
nvdnp::ExperimentConfig resolve_config(const std::string& arg) {
  if (std::filesystem::exists(arg)) return nvdnp::load_config(arg);
  for (const std::string& name : nvdnp::preset_names()) {
    if (name == arg) return nvdnp::load_preset(name);
  }
  throw nvdnp::ValidationError(fmt::format("'{}' is neither a config file nor a preset", arg));
}

void apply_overrides(nvdnp::ExperimentConfig& config, const std::string& out_dir, unsigned workers) {
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (workers > 0) config.workers = workers;
}

nvdnp::ProtocolProgram parse_file(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return nvdnp::seq::parse_program(text);
  } catch (const nvdnp::seq::ParseError& e) {
    throw nvdnp::seq::ParseError(e.kind(), e.line(), e.column(), fmt::format("{} (in {})", e.detail(), path));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV-14N nuclear polarization simulator"};
  app.require_subcommand(1);
  std::string simd = "auto";
  app.add_option("--simd", simd, "Kernel backend: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  std::string config_arg;
  std::string out_dir;
  unsigned workers = 0;
  auto* run = app.add_subcommand("run", "Run one experiment and write spectra, tables and a manifest");
  run->add_option("config", config_arg, "Config file or preset name")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");

  auto* sweep = app.add_subcommand("sweep", "Run the configured parameter sweep");
  sweep->add_option("config", config_arg, "Config file or preset name")->required();
  sweep->add_option("--out", out_dir, "Output directory (overrides the config)");
  sweep->add_option("--workers", workers, "Worker threads (overrides the config)")->check(CLI::Range(1, 256));

  std::string seq_path;
  auto* parse = app.add_subcommand("parse", "Check a sequence file and summarize it");
  parse->add_option("file", seq_path, "Sequence file")->required();

  bool write_back = false;
  auto* fmt_cmd = app.add_subcommand("fmt", "Print a sequence file in canonical form");
  fmt_cmd->add_option("file", seq_path, "Sequence file")->required();
  fmt_cmd->add_flag("-w,--write", write_back, "Rewrite the file in place");

  double p_a = 1.0;
  double p_b = 0.0;
  int n = 10;
  double initial = 0.5;
  long long trials = 0;
  std::uint64_t seed = 1;
  unsigned toy_workers = 1;
  auto* toy = app.add_subcommand("toy", "Depleted population of the two-level pumping model");
  toy->add_option("--pa", p_a, "Pulse-pair flip probability")->required();
  toy->add_option("--pb", p_b, "Optical flip probability")->required();
  toy->add_option("--n", n, "Number of cycles")->required();
  toy->add_option("--initial", initial, "Initial depleted population")->capture_default_str();
  toy->add_option("--trials", trials, "Monte Carlo trials (0 disables the column)");
  toy->add_option("--seed", seed, "Monte Carlo seed")->capture_default_str();
  toy->add_option("--workers", toy_workers, "Monte Carlo worker threads")->check(CLI::Range(1, 64));

  std::string preset_name;
  auto* presets = app.add_subcommand("presets", "List or show built-in presets");
  presets->require_subcommand(1);
  auto* presets_list = presets->add_subcommand("list", "List preset names");
  auto* presets_show = presets->add_subcommand("show", "Print a preset config");
  presets_show->add_option("name", preset_name, "Preset name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationError;
  }

  try {
    if (simd == "scalar") nvdnp::simd::set_backend(nvdnp::simd::Backend::kScalar);
    if (simd == "avx2") nvdnp::simd::set_backend(nvdnp::simd::Backend::kAvx2);

    if (*run) {
      nvdnp::ExperimentConfig config = resolve_config(config_arg);
      apply_overrides(config, out_dir, 0);
      const nvdnp::RunOutputs out = nvdnp::run_experiment(config);
      for (const auto& f : out.files) fmt::print("{}\n", f.string());
      if (out.warnings > 0) fmt::print(stderr, "{} warning(s); see trace.csv\n", out.warnings);
    } else if (*sweep) {
      nvdnp::ExperimentConfig config = resolve_config(config_arg);
      apply_overrides(config, out_dir, workers);
      if (config.sweep.empty()) throw nvdnp::ValidationError(fmt::format("'{}' has no [sweep] axes", config_arg));
      const nvdnp::RunOutputs out = nvdnp::run_sweep(config);
      for (const auto& f : out.files) fmt::print("{}\n", f.string());
    } else if (*parse) {
      const nvdnp::ProtocolProgram program = parse_file(seq_path);
      fmt::print("ok: {} top-level statement(s), repeat {}, {} executed instruction(s)\n", program.body().size(),
                 program.repeat_count(), program.executed_instruction_count());
    } else if (*fmt_cmd) {
      const std::string text = nvdnp::seq::format_program(parse_file(seq_path));
      if (write_back) {
        std::ofstream out(seq_path, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", seq_path));
      } else {
        fmt::print("{}", text);
      }
    } else if (*toy) {
      nvdnp::toy::ToyModelParams params{p_a, p_b, initial};
      params.validate();
      if (n < 0) throw nvdnp::ValidationError("--n must be >= 0");
      const std::vector<double> series = nvdnp::toy::iterate_populations(params, n);
      fmt::print("cycle,p_depleted,p_depleted_closed{}\n", trials > 0 ? ",p_depleted_mc" : "");
      for (int k = 0; k <= n; ++k) {
        std::string row = fmt::format("{},{},{}", k, series[static_cast<std::size_t>(k)],
                                      nvdnp::toy::closed_form_depleted(params, k));
        if (trials > 0) row += fmt::format(",{}", nvdnp::toy::monte_carlo_oracle(params, k, trials, seed, toy_workers));
        fmt::print("{}\n", row);
      }
    } else if (*presets_list) {
      for (const std::string& name : nvdnp::preset_names()) fmt::print("{}\n", name);
    } else if (*presets_show) {
      fmt::print("{}", nvdnp::preset_text(preset_name));
    }
  } catch (const nvdnp::seq::ParseError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kValidationError;
  } catch (const nvdnp::BuildError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kValidationError;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kValidationError;
  } catch (const std::domain_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kValidationError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kRuntimeError;
  }
  return 0;
}
