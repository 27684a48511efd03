#pragma once

#include "sketchfer/sketch.hpp"
#include "sketchfer/types.hpp"

namespace sketchfer {

class RowBlockSource;

inline constexpr double kDefaultEigTol = 1e-10;

/// Truncated inverse square root of a symmetric PSD matrix.
/// `basis` holds eigenvectors (columns, descending eigenvalue) and
/// `inv_sqrt_eigs` the matching lambda^{-1/2}. Only eigenvalues with
/// lambda >= eig_tol * lambda_max and lambda > 0 are kept.
struct PinvHalf {
  Matrix basis;
  Vector inv_sqrt_eigs;
  double lambda_max = 0.0;

  Index rank() const { return inv_sqrt_eigs.size(); }
  /// basis * diag(inv_sqrt_eigs), the whitening factor.
  Matrix whitener() const;
};

/// Throws not_symmetric if max|C - C^T| > 1e-8 * max|C|. A matrix with no
/// positive eigenvalue yields rank 0.
PinvHalf pinv_half(const Matrix& c, double eig_tol);

/// Low-rank features whose Gram approximates the layer's linear kernel.
struct LowRankFeatures {
  RowMatrix data;     // N x r
  Matrix projection;  // d_l x r; maps any row of the layer into the same space
  int layer_id = 0;
  Index kept_rank = 0;
  double eig_tol = kDefaultEigTol;
};

/// Two passes over the layer. Pass one sketches B = S X; the M x M matrix
/// B B^T is eigendecomposed and truncated; pass two streams X again and emits
/// X B^T Q Lambda^{-1/2}. Throws degenerate_sketch when B B^T has no positive
/// eigenvalue (for example an all-zero layer).
LowRankFeatures nystrom_linear_features(const RowBlockSource& x, const SketchSpec& spec,
                                        double eig_tol = kDefaultEigTol, int layer_id = 0);

/// Applies a fitted projection to another stream of the same layer (test rows).
RowMatrix project_rows(const LowRankFeatures& features, const RowBlockSource& x);

}  // namespace sketchfer
