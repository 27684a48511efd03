#include "sketchfer/calibration.hpp"

#include "sketchfer/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sketchfer {

RowMatrix scores_to_confidence(const PredictionScores& scores, double t) {
  if (!(t > 0.0)) {
    throw Error(Errc::nonpositive_temperature, "t = " + std::to_string(t));
  }
  RowMatrix p(scores.scores.rows(), scores.scores.cols());
  for (Index i = 0; i < p.rows(); ++i) {
    const auto row = scores.scores.row(i);
    const double top = row.maxCoeff();
    double total = 0.0;
    for (Index j = 0; j < p.cols(); ++j) {
      p(i, j) = std::exp((row(j) - top) / t);
      total += p(i, j);
    }
    p.row(i) /= total;
  }
  return p;
}

int confidence_bin(double confidence, int n_bins) {
  if (confidence <= 0.0) return 0;
  int b = static_cast<int>(std::ceil(confidence * n_bins)) - 1;
  b = std::clamp(b, 0, n_bins - 1);
  // Settle rounding at the edges against the same k / C values used to
  // describe the bins.
  while (b > 0 && confidence <= static_cast<double>(b) / n_bins) --b;
  while (b < n_bins - 1 && confidence > static_cast<double>(b + 1) / n_bins) ++b;
  return b;
}

CalibrationReport ece(const RowBlock& probabilities, std::span<const int> true_labels,
                      int n_bins) {
  if (n_bins < 1) throw Error(Errc::invalid_argument, "n_bins must be >= 1");
  if (static_cast<std::size_t>(probabilities.rows()) != true_labels.size()) {
    throw Error(Errc::sample_count_mismatch, "probabilities vs labels");
  }
  const Index c = probabilities.cols();
  CalibrationReport report;
  report.n_bins = n_bins;
  report.bins.assign(static_cast<std::size_t>(n_bins), {});
  std::vector<double> conf_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<Index> hits(static_cast<std::size_t>(n_bins), 0);
  for (Index i = 0; i < probabilities.rows(); ++i) {
    const int truth = true_labels[static_cast<std::size_t>(i)];
    if (truth < 0 || truth >= c) {
      throw Error(Errc::label_out_of_range, "label " + std::to_string(truth) + " at row " +
                                                std::to_string(i));
    }
    const auto row = probabilities.row(i);
    if (std::abs(row.sum() - 1.0) > 1e-6) {
      throw Error(Errc::invalid_argument, "row " + std::to_string(i) + " does not sum to 1");
    }
    Index pred = 0;
    for (Index j = 1; j < c; ++j) {
      if (row(j) > row(pred)) pred = j;
    }
    const double conf = row(pred);
    const auto b = static_cast<std::size_t>(confidence_bin(conf, n_bins));
    report.bins[b].count += 1;
    conf_sum[b] += conf;
    hits[b] += pred == truth ? 1 : 0;
  }
  const auto n = static_cast<double>(probabilities.rows());
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    auto& bin = report.bins[b];
    if (bin.count == 0) continue;
    const auto count = static_cast<double>(bin.count);
    bin.mean_confidence = conf_sum[b] / count;
    bin.accuracy = static_cast<double>(hits[b]) / count;
    report.ece += count / n * std::abs(bin.accuracy - bin.mean_confidence);
  }
  return report;
}

std::vector<double> default_temperature_grid() {
  std::vector<double> grid(50);
  for (int k = 0; k < 50; ++k) grid[k] = std::pow(10.0, -2.0 + 4.0 * k / 49.0);
  return grid;
}

TemperatureFit fit_temperature(const PredictionScores& scores, std::span<const int> labels,
                               const std::vector<double>& grid, int n_bins) {
  TemperatureFit fit;
  fit.baseline_ece = ece(scores_to_confidence(scores, 1.0), labels, n_bins).ece;
  fit.t = 1.0;
  fit.ece = fit.baseline_ece;
  for (double t : grid) {
    if (!(t > 0.0)) {
      throw Error(Errc::nonpositive_temperature, "grid contains t = " + std::to_string(t));
    }
    const double e = ece(scores_to_confidence(scores, t), labels, n_bins).ece;
    if (e < fit.ece || (e == fit.ece && std::abs(t - 1.0) < std::abs(fit.t - 1.0))) {
      fit.t = t;
      fit.ece = e;
    }
  }
  return fit;
}

nlohmann::json to_json(const CalibrationReport& report) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : report.bins) {
    bins.push_back({{"count", b.count}, {"conf", b.mean_confidence}, {"acc", b.accuracy}});
  }
  nlohmann::json j = {{"ece", report.ece}, {"n_bins", report.n_bins}, {"bins", bins}};
  j["temperature"] = report.temperature ? nlohmann::json(*report.temperature) : nlohmann::json();
  return j;
}

}  // namespace sketchfer
