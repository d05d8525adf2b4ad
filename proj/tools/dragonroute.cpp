#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dragonroute/config.hpp"
#include "dragonroute/harness.hpp"

namespace {

using namespace dragonroute;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

void emit(const std::string& out_path, const std::string& text, bool quiet) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
    if (!quiet) std::cerr << "wrote " << out_path << "\n";
  }
}

ExperimentConfig load_or_default(const std::string& path) {
  if (!path.empty()) return load_config(path);
  ExperimentConfig cfg;  // built-in smoke defaults: 2 ranks across groups
  cfg.allocation.ranks = 2;
  cfg.routing.kind = RoutingPlan::Kind::Static;
  cfg.routing.static_mode = RoutingMode::MinHash;
  return cfg;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::string out_path, bool quiet) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (out_path.empty()) out_path = cfg.output;
  auto records = run_experiment(cfg);
  emit(out_path, records_to_csv(records), quiet);
  if (!quiet && !records.empty())
    std::cerr << summary_to_csv(summarize(records, "mode"));
  return 0;
}

int cmd_sweep(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::string prefix, bool quiet) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (!cfg.sweep || cfg.sweep->sizes.empty() || cfg.sweep->modes.empty())
    throw ConfigError("sweep: config needs a sweep section with sizes and modes");
  if (prefix.empty()) prefix = cfg.output.empty() ? "sweep" : cfg.output;
  for (std::uint64_t size : cfg.sweep->sizes) {
    for (RoutingMode mode : cfg.sweep->modes) {
      ExperimentConfig c = cfg;
      c.sweep.reset();
      c.workload.size_bytes = size;
      c.routing = RoutingPlan{};
      c.routing.kind = RoutingPlan::Kind::Static;
      c.routing.static_mode = mode;
      auto records = run_experiment(c);
      std::string path =
          prefix + "_s" + std::to_string(size) + "_" + to_string(mode) + ".csv";
      write_text(path, records_to_csv(records));
      if (!quiet) std::cerr << "wrote " << path << "\n";
    }
  }
  return 0;
}

int cmd_summarize(const std::string& input, const std::string& group_by,
                  const std::string& out_path, bool quiet) {
  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot open '" + input + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  auto records = parse_records_csv(text);
  auto rows = summarize(records, group_by);
  emit(out_path, summary_to_csv(rows), quiet);
  return 0;
}

int cmd_validate_model(const std::string& config_path, std::optional<std::uint64_t> seed,
                       double tolerance, bool quiet) {
  ExperimentConfig cfg = load_or_default(config_path);
  if (seed) cfg.seed = *seed;
  auto report = validate_model(cfg);
  if (!quiet) {
    std::printf("%10s %14s %14s %10s\n", "size", "measured", "predicted", "error");
    for (const auto& r : report.rows)
      std::printf("%10llu %14.1f %14.1f %9.2f%%\n",
                  static_cast<unsigned long long>(r.size), r.measured, r.predicted,
                  100.0 * r.rel_error);
  }
  bool ok = report.max_rel_error <= tolerance;
  std::printf("max error %.2f%% (tolerance %.0f%%): %s\n", 100.0 * report.max_rel_error,
              100.0 * tolerance, ok ? "OK" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dragonroute: deterministic dragonfly-network routing experiments"};
  app.require_subcommand(1);

  std::string config_path, out_path, input, group_by = "mode";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  double tolerance = 0.20;

  auto* run = app.add_subcommand("run", "run one experiment, emit the per-rank CSV");
  run->add_option("--config", config_path, "experiment JSON")->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out_path, "CSV output path (default: config output or stdout)");
  run->add_flag("--quiet", quiet, "suppress progress and summary");

  auto* sweep = app.add_subcommand("sweep", "run every size x mode combination");
  sweep->add_option("--config", config_path, "experiment JSON with a sweep section")
      ->required();
  sweep->add_option("--seed", seed, "override the config seed");
  sweep->add_option("--out", out_path, "output file prefix");
  sweep->add_flag("--quiet", quiet, "suppress progress");

  auto* summ = app.add_subcommand("summarize", "per-group stats from a run CSV");
  summ->add_option("input", input, "run CSV file")->required();
  summ->add_option("--group-by", group_by, "mode|trial|iteration|sender");
  summ->add_option("--out", out_path, "summary CSV path (default stdout)");
  summ->add_flag("--quiet", quiet, "suppress progress");

  auto* val = app.add_subcommand("validate-model",
                                 "check transfer-time predictions against measurement");
  val->add_option("--config", config_path, "experiment JSON (optional)");
  val->add_option("--seed", seed, "override the config seed");
  val->add_option("--tolerance", tolerance, "relative error allowed (default 0.20)");
  val->add_flag("--quiet", quiet, "table off, verdict only");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, seed, out_path, quiet);
    if (sweep->parsed()) return cmd_sweep(config_path, seed, out_path, quiet);
    if (summ->parsed()) return cmd_summarize(input, group_by, out_path, quiet);
    if (val->parsed()) return cmd_validate_model(config_path, seed, tolerance, quiet);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
