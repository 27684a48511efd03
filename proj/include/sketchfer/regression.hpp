#pragma once

#include "sketchfer/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace sketchfer {

enum class RidgeMode { automatic, primal, dual };

/// Closed-form ridge regression model with one output column per class.
struct RidgeModel {
  RidgeMode mode = RidgeMode::primal;  // primal or dual once fitted
  Matrix weights;           // primal: D x c; dual: N x c coefficients
  RowMatrix train_features; // dual only: the N x D design
  double alpha = 1.0;
  int class_count = 0;

  Index input_dim() const;
};

/// Scores plus first-index argmax labels.
struct PredictionScores {
  RowMatrix scores;
  std::vector<int> labels;

  static PredictionScores from_scores(RowMatrix scores);
};

/// primal: (X^T X + alpha I)^{-1} X^T Y. dual: coefficients (X X^T + alpha I)^{-1} Y.
/// automatic picks primal when N >= D.
RidgeModel fit_ridge(const RowBlock& x, const LabelMatrix& y, double alpha,
                     RidgeMode mode = RidgeMode::automatic);

PredictionScores predict(const RidgeModel& model, const RowBlock& x);

/// One-hot rows at the first argmax.
LabelMatrix pseudo_label(const PredictionScores& scores);

using PseudoLabeler = std::function<LabelMatrix(const PredictionScores&)>;

struct TransductiveFit {
  RidgeModel model;          // primal
  LabelMatrix pseudo_labels; // labels assigned to the unlabeled rows
  double beta = 0.0;
  double beta_prime = 0.0;
};

/// Stage 1: ridge(X, Y, alpha) labels X' via `labeler` (default pseudo_label).
/// Stage 2: W = (b' X'^T X' + b X^T X + I)^{-1} (b' X'^T Y' + b X^T Y).
/// Throws no_unlabeled when beta_prime > 0 and X' has no rows.
TransductiveFit fit_transductive(const RowBlock& x, const LabelMatrix& y,
                                 const RowBlock& x_unlabeled, double beta, double beta_prime,
                                 double alpha, const PseudoLabeler& labeler = {});

double accuracy(std::span<const int> predicted, std::span<const int> truth);

/// Fold id per row. Stratified round-robin within each shuffled class unless a
/// class has fewer rows than folds, in which case rows are shuffled globally
/// (and `stratified` is set to false).
struct FoldAssignment {
  std::vector<int> fold;
  bool stratified = true;
};
FoldAssignment assign_folds(std::span<const int> labels, int n_classes, int folds,
                            std::uint64_t seed);

struct AlphaSelection {
  double alpha = 0.0;
  std::vector<double> mean_accuracy;  // per grid entry, empty for a one-element grid
  bool stratified = true;
};

/// k-fold CV over the grid; highest mean validation accuracy wins, ties go to
/// the larger alpha.
AlphaSelection cross_validate_alpha(const RowBlock& x, const LabelMatrix& y, int folds,
                                    const std::vector<double>& grid, std::uint64_t seed);

struct BetaSelection {
  double beta = 0.0;
  double beta_prime = 0.0;
  std::vector<double> mean_accuracy;  // row-major over (beta, beta_prime)
  bool stratified = true;
};

/// CV of the transductive weights on the labeled rows. Ties go to the smaller
/// beta_prime, then the earlier beta in grid order. The pair beta = beta' = 0
/// (W = 0) is skipped and reported as NaN in mean_accuracy.
BetaSelection cross_validate_betas(const RowBlock& x, const LabelMatrix& y,
                                   const RowBlock& x_unlabeled, int folds,
                                   const std::vector<double>& beta_grid,
                                   const std::vector<double>& beta_prime_grid, double alpha,
                                   std::uint64_t seed, const PseudoLabeler& labeler = {});

/// Binary model blob, little-endian:
///   char[8] "SKFRIDGE", u32 version (1), u32 mode (0 primal, 1 dual),
///   u64 weight rows, u64 weight cols, u64 feature rows, u64 feature cols,
///   f64 alpha, u64 class count,
///   f64 weights (row-major), f64 train features (row-major, dual only).
void save_model(const RidgeModel& model, const std::filesystem::path& path);
RidgeModel load_model(const std::filesystem::path& path);

}  // namespace sketchfer
