#pragma once

#include "sketchfer/config.hpp"
#include "sketchfer/manifest.hpp"
#include "sketchfer/results.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sketchfer {

/// Seed of trial `trial`: config.seed + trial. Every random choice inside a
/// trial (subsample, sketches, folds) is derived from it, so the supervised
/// run and both baselines see the same rows and folds for equal seeds.
std::uint64_t trial_seed(const RunConfig& config, int trial);

/// Seeded stratified subsample, sorted. Each class keeps round(portion * n_c)
/// rows (at least one); portion 1 keeps everything.
std::vector<Index> stratified_subsample(std::span<const int> labels, int n_classes,
                                        double portion, std::uint64_t seed);

/// Exactly `per_class` rows of every class, sorted. Throws class_exhausted
/// when a class is too small.
std::vector<Index> labeled_subset(std::span<const int> labels, int n_classes, int per_class,
                                  std::uint64_t seed);

/// Dispatches on config.mode.
RunResult run(const RunConfig& config, const Manifest& manifest);

/// Per portion and trial: sketch + low-rank features per layer (in parallel),
/// alignment weights, optional RBF Nystrom, CV of alpha, ridge fit, test
/// accuracy and temperature scaling.
RunResult run_supervised(const RunConfig& config, const Manifest& manifest);

/// Per labels_per_class and trial: transductive fit on a labeled subset with
/// the remaining training rows unlabeled, against a supervised fit on the
/// labeled rows alone.
RunResult run_semi(const RunConfig& config, const Manifest& manifest);

/// Full training set. Accumulate mode fits prefixes of the support sorted by
/// decreasing mu (weights kept); individual mode fits each layer alone.
RunResult run_ablation(const RunConfig& config, const Manifest& manifest);

/// baseline-randproj: feature hashing X_l S_l instead of the Nystrom features.
/// baseline-rbf-bank: RBF kernel bank on the manifest's raw inputs.
RunResult run_baselines(const RunConfig& config, const Manifest& manifest);

}  // namespace sketchfer
