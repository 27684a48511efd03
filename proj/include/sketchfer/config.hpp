#pragma once

#include "sketchfer/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sketchfer {

enum class RunMode {
  supervised,
  semi,
  ablation_accumulate,
  ablation_individual,
  baseline_randproj,
  baseline_rbf_bank,
};

std::string_view mode_name(RunMode mode);
RunMode parse_mode(std::string_view name);

/// `points` fractions spaced evenly in log space from `lo` to `hi`.
std::vector<double> log_spaced_portions(double lo, double hi, int points);

struct RunConfig {
  RunMode mode = RunMode::supervised;
  std::filesystem::path manifest;
  std::filesystem::path out_dir = "sketchfer_out";

  Index buckets = 512;      // M
  Index stacks = 4;         // s
  double ms_factor = 2.0;   // M_s = ms_factor * M
  Index rbf_stacks = 4;     // hash functions for the RBF landmarks
  bool skip_rbf = false;
  double eig_tol = 1e-10;

  std::vector<double> alpha_grid{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> beta_grid{0.0, 0.1, 1.0, 10.0};
  std::vector<double> beta_prime_grid{0.0, 0.1, 1.0, 10.0};
  int cv_folds = 5;

  std::vector<double> portions = log_spaced_portions(0.02, 1.0, 6);
  std::vector<int> labels_per_class{2, 5, 10, 20, 50, 100};
  std::uint64_t seed = 0;
  int trials = 5;

  int n_bins = 15;
  std::vector<double> temperature_grid;  // empty: 50 log-spaced values in [1e-2, 1e2]

  std::size_t bandwidth_max_pairs = 1'000'000;
  int bank_p_lo = -2;
  int bank_p_hi = 10;

  bool individual_all_layers = false;  // ablation: evaluate every layer, not just the support
  Index block_rows = 1024;
  int threads = 0;  // 0: hardware concurrency

  Index rbf_buckets() const;
  /// Throws invalid_config on any broken invariant.
  void validate() const;
};

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
nlohmann::json to_json(const RunConfig& config);

}  // namespace sketchfer
