#pragma once

#include "sketchfer/regression.hpp"
#include "sketchfer/types.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <vector>

namespace sketchfer {

inline constexpr int kDefaultBins = 15;

struct BinStats {
  Index count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

struct CalibrationReport {
  double ece = 0.0;
  int n_bins = kDefaultBins;
  std::vector<BinStats> bins;
  std::optional<double> temperature;
};

/// Row-wise softmax(scores / t). Throws nonpositive_temperature unless t > 0.
RowMatrix scores_to_confidence(const PredictionScores& scores, double t);

/// Equal-width bins on (0, 1], right-closed; confidence 0 goes to the first
/// bin. Confidence is the row maximum, the prediction its first argmax.
/// Throws label_out_of_range for labels outside [0, c).
CalibrationReport ece(const RowBlock& probabilities, std::span<const int> true_labels,
                      int n_bins = kDefaultBins);

/// Bin of a confidence value under the rule above.
int confidence_bin(double confidence, int n_bins);

/// 50 log-spaced temperatures in [1e-2, 1e2].
std::vector<double> default_temperature_grid();

struct TemperatureFit {
  double t = 1.0;
  double ece = 0.0;         // at t
  double baseline_ece = 0.0;  // at t = 1
};

/// Picks the t minimizing ECE on the given data. t = 1 is always a candidate;
/// ties go to the t closest to 1.
TemperatureFit fit_temperature(const PredictionScores& scores, std::span<const int> labels,
                               const std::vector<double>& grid, int n_bins = kDefaultBins);

nlohmann::json to_json(const CalibrationReport& report);

}  // namespace sketchfer
