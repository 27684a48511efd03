// Command-line front end: run / ablate / semi / baseline / export.

#include "sketchfer/config.hpp"
#include "sketchfer/error.hpp"
#include "sketchfer/manifest.hpp"
#include "sketchfer/pipeline.hpp"
#include "sketchfer/results.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace sketchfer;

namespace {

struct Overrides {
  std::string config;
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::optional<Index> buckets;
  std::optional<Index> stacks;
  std::optional<double> ms_factor;
  std::vector<double> portions;
  bool skip_rbf = false;
  std::string out_dir;
  std::optional<int> trials;
  std::optional<int> threads;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--manifest", o.manifest, "feature manifest (overrides the config)");
  cmd->add_option("--seed", o.seed, "base seed; trial t uses seed + t");
  cmd->add_option("--buckets", o.buckets, "sketch size M");
  cmd->add_option("--stacks", o.stacks, "CountSketch stacks s (must divide M)");
  cmd->add_option("--ms-factor", o.ms_factor, "RBF landmarks M_s = factor * M");
  cmd->add_option("--portion", o.portions, "training fraction(s) in (0, 1]");
  cmd->add_flag("--skip-rbf", o.skip_rbf, "linear ridge on the combined features");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
  cmd->add_option("--trials", o.trials, "seeded trials per setting");
  cmd->add_option("--threads", o.threads, "worker threads for per-layer work (0: all cores)");
  cmd->add_flag("-v,--verbose", o.verbose, "debug logging");
}

RunConfig resolve(const Overrides& o, RunMode mode) {
  RunConfig cfg;
  if (!o.config.empty()) cfg = load_config(o.config, cfg);
  if (!o.manifest.empty()) cfg.manifest = o.manifest;
  if (o.seed) cfg.seed = *o.seed;
  if (o.buckets) cfg.buckets = *o.buckets;
  if (o.stacks) cfg.stacks = *o.stacks;
  if (o.ms_factor) cfg.ms_factor = *o.ms_factor;
  if (!o.portions.empty()) cfg.portions = o.portions;
  if (o.skip_rbf) cfg.skip_rbf = true;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.trials) cfg.trials = *o.trials;
  if (o.threads) cfg.threads = *o.threads;
  cfg.mode = mode;
  if (cfg.manifest.empty()) throw Error(Errc::invalid_config, "no manifest given");
  cfg.validate();
  return cfg;
}

void setup_logging(const fs::path& out_dir, bool verbose) {
  fs::create_directories(out_dir);
  auto console = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
  auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>((out_dir / "run.log").string(),
                                                                   true);
  auto logger = std::make_shared<spdlog::logger>("sketchfer", spdlog::sinks_init_list{console, file});
  logger->set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  logger->flush_on(spdlog::level::info);
  spdlog::set_default_logger(logger);
}

int execute(const Overrides& o, RunMode mode, bool export_only) {
  RunConfig cfg = resolve(o, mode);
  if (export_only) {
    cfg.portions = {1.0};
    cfg.trials = 1;
  }
  setup_logging(cfg.out_dir, o.verbose);
  spdlog::info("mode {} manifest {}", mode_name(cfg.mode), cfg.manifest.string());
  const Manifest manifest = with_stage("manifest", [&] { return load_manifest(cfg.manifest); });
  const RunResult result = run(cfg, manifest);
  if (!export_only) write_outputs(result, cfg.out_dir);
  if (result.export_data) export_predictions(result, cfg.out_dir);
  else if (export_only) throw Error(Errc::io, "run produced no training predictions");
  spdlog::info("wrote {}", cfg.out_dir.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-wise sketched kernel regression on pretrained features"};
  app.require_subcommand(1);

  Overrides run_o, ablate_o, semi_o, base_o, export_o;
  std::string ablate_kind = "accumulate";
  std::string baseline_kind = "randproj";

  auto* run_cmd = app.add_subcommand("run", "supervised portion sweep");
  add_common(run_cmd, run_o);

  auto* ablate_cmd = app.add_subcommand("ablate", "accumulated or individual layers");
  add_common(ablate_cmd, ablate_o);
  ablate_cmd->add_option("--kind", ablate_kind, "accumulate | individual")
      ->check(CLI::IsMember({"accumulate", "individual"}));

  auto* semi_cmd = app.add_subcommand("semi", "transductive semi-supervised sweep");
  add_common(semi_cmd, semi_o);

  auto* base_cmd = app.add_subcommand("baseline", "random projection or RBF bank");
  add_common(base_cmd, base_o);
  base_cmd->add_option("--kind", baseline_kind, "randproj | rbf-bank")
      ->check(CLI::IsMember({"randproj", "rbf-bank"}));

  auto* export_cmd =
      app.add_subcommand("export", "fit on the full training set and save its predictions");
  add_common(export_cmd, export_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) return execute(run_o, RunMode::supervised, false);
    if (*ablate_cmd) {
      return execute(ablate_o,
                     ablate_kind == "individual" ? RunMode::ablation_individual
                                                 : RunMode::ablation_accumulate,
                     false);
    }
    if (*semi_cmd) return execute(semi_o, RunMode::semi, false);
    if (*base_cmd) {
      return execute(base_o,
                     baseline_kind == "rbf-bank" ? RunMode::baseline_rbf_bank
                                                 : RunMode::baseline_randproj,
                     false);
    }
    return execute(export_o, RunMode::supervised, true);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return is_validation_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
