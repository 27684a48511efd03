#pragma once

#include "sketchfer/config.hpp"
#include "sketchfer/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sketchfer {

struct CalibrationSummary {
  double temperature = 1.0;
  double ece_train_before = 0.0;
  double ece_train_after = 0.0;
  double ece_test_before = 0.0;
  double ece_test_after = 0.0;
};

/// One supervised fit/evaluate on a given portion and seed.
struct TrialRecord {
  std::string method = "nystrom";  // nystrom | randproj | rbf-bank
  double portion = 1.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double alpha = 0.0;
  double sigma_sq = 0.0;  // 0 when the RBF step was skipped
  double r_squared = 0.0;
  double alignment = 0.0;
  std::vector<double> mu;        // one weight per layer (or per kernel for rbf-bank)
  std::vector<int> support_ids;  // layer ids with positive weight
  CalibrationSummary calibration;
};

struct AblationRecord {
  std::string kind;  // accumulate | individual
  std::uint64_t seed = 0;
  int step = 0;      // prefix size (accumulate) or position in the sorted support
  std::vector<int> layer_ids;
  double accuracy = 0.0;
};

struct SemiRecord {
  int labels_per_class = 0;
  std::uint64_t seed = 0;
  double semi_accuracy = 0.0;
  double supervised_accuracy = 0.0;
  double relative_improvement = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double beta_prime = 0.0;
  double pseudo_label_accuracy = 0.0;
};

/// Training-set KRR scores kept for external distillation.
struct PredictionExport {
  RowMatrix train_scores;  // N_train x c
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double sigma_sq = 0.0;
  double temperature = 1.0;
  std::vector<double> mu;
  std::vector<int> layer_ids;
};

struct RunResult {
  std::string mode;
  RunConfig config;
  std::string dataset;
  std::vector<int> layer_ids;
  std::vector<TrialRecord> trials;
  std::vector<AblationRecord> ablation;
  std::vector<SemiRecord> semi;
  std::optional<PredictionExport> export_data;
  std::map<std::string, double> timing;  // seconds per stage, summed over trials
};

/// Everything except timing is a deterministic function of config + data.
nlohmann::json to_json(const RunResult& result);

/// results.json plus one CSV per figure series:
///   accuracy.csv   accuracy per method/portion/seed
///   mu.csv         layer weights per portion/seed
///   ablation.csv   accumulated vs individual layers
///   semi.csv       semi-supervised accuracy and relative improvement
///   calibration.csv ECE before/after temperature scaling
///   timing.csv     seconds per stage
void write_outputs(const RunResult& result, const std::filesystem::path& out_dir);

/// predictions.npy (float64 N_train x c) and predictions.json (alpha, mu,
/// sigma^2, t, seed). Throws io when the run kept no training predictions.
void export_predictions(const RunResult& result, const std::filesystem::path& out_dir);

}  // namespace sketchfer
