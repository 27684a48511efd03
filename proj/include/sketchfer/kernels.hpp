#pragma once

#include "sketchfer/lowrank.hpp"
#include "sketchfer/sketch.hpp"
#include "sketchfer/types.hpp"

#include <cstdint>
#include <vector>

namespace sketchfer {

class RowBlockSource;

/// Nystrom feature map for k(x, y) = exp(-||x - y||^2 / (2 sigma^2)).
/// embed(x) = k(x, landmarks) * whitener, so embed(x) . embed(y)
/// approximates k(x, y), exactly when the landmarks are the data rows.
struct RbfFeatureMap {
  RowMatrix landmarks;  // M_s x D
  Vector landmark_sq_norms;
  double sigma_sq = 1.0;
  Matrix whitener;      // M_s x r
  Index kept_rank = 0;

  Index input_dim() const { return landmarks.cols(); }
};

/// Exact RBF cross kernel, entries exp(-||a_i - b_j||^2 / (2 sigma_sq)).
RowMatrix rbf_kernel(const RowBlock& a, const RowBlock& b, double sigma_sq);

/// max_i ||x_i||^2 / 2. Throws degenerate_features when it is zero.
double rbf_sigma_heuristic(const RowBlock& x_phi);

/// Landmarks are the sketched rows S * X. Throws degenerate_features when the
/// landmark kernel has no usable eigenvalue.
RbfFeatureMap fit_rbf_nystrom(const RowMatrix& x_phi, const SketchSpec& spec, double sigma_sq,
                              double eig_tol = kDefaultEigTol);

RowMatrix transform(const RbfFeatureMap& map, const RowBlockSource& x);
RowMatrix transform(const RbfFeatureMap& map, const RowMatrix& x);

/// Median of squared pairwise distances over pairs i < j. When the pair count
/// exceeds `max_pairs`, `max_pairs` pairs are drawn uniformly with `seed`.
/// Throws single_sample when N < 2.
double median_bandwidth(const RowBlock& x, std::size_t max_pairs, std::uint64_t seed);

/// One Nystrom map per p in [p_lo, p_hi] with 2 sigma^2 = 2^p * gamma.
std::vector<RbfFeatureMap> rbf_kernel_bank(const RowMatrix& x, double gamma, int p_lo, int p_hi,
                                           const SketchSpec& spec,
                                           double eig_tol = kDefaultEigTol);

}  // namespace sketchfer
