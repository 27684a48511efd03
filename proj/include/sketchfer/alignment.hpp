#pragma once

#include "sketchfer/lowrank.hpp"
#include "sketchfer/types.hpp"

#include <vector>

namespace sketchfer {

/// Frobenius statistics of the layer kernels K_l = F_l F_l^T.
/// gram(k, l) = ||F_k^T F_l||_F^2 = <K_k, K_l>_F and
/// target(l) = ||F_l^T Y||_F^2 = <K_l, Y Y^T>_F.
struct AlignmentProblem {
  Matrix gram;
  Vector target;

  Index n_layers() const { return target.size(); }
};

struct AlignmentWeights {
  Vector mu;                  // unit l2 norm, nonnegative
  std::vector<Index> support; // indices with mu > 0 after zeroing
  double objective = 0.0;     // <K, YY^T>_F / ||K||_F at mu
  Vector v;                   // QP minimizer before normalization
  bool converged = true;
  long iterations = 0;
};

struct QpOptions {
  double tol = 1e-12;
  long max_iter = 100000;
  double support_eps = 1e-8;  // relative to max(mu)
};

AlignmentProblem build_gram_stats(const std::vector<const RowMatrix*>& features,
                                  const LabelMatrix& y);
AlignmentProblem build_gram_stats(const std::vector<LowRankFeatures>& features,
                                  const LabelMatrix& y);

/// Maximizes mu.a / sqrt(mu^T M mu) over the nonnegative unit sphere by
/// solving min_{v >= 0} v^T M v - 2 v^T a (projected gradient with step
/// 1/lambda_max(M), then an exact solve on the detected support) and
/// normalizing v. Throws no_signal when a == 0.
AlignmentWeights solve_nn_quadratic(const AlignmentProblem& problem, const QpOptions& opts = {});

/// Alignment objective of an arbitrary weight vector.
double alignment_objective(const AlignmentProblem& problem, const Vector& mu);

/// Largest violation of the QP optimality conditions at v: |g_i| where
/// v_i > 0 and max(0, -g_i) where v_i == 0, with g = 2(M v - a).
double kkt_residual(const AlignmentProblem& problem, const Vector& v);

struct KernelStats {
  double inner_with_target;  // <K, Y Y^T>_F
  double frobenius_norm;     // ||K||_F
};

/// <K, YY^T>_F / ||K||_F. Throws zero_kernel when ||K||_F == 0.
double alignment_score(const KernelStats& stats);

/// Stats of K = F F^T without forming K.
KernelStats kernel_stats(const RowBlock& factor, const LabelMatrix& y);

/// [sqrt(mu_l) F_l] over the support, in layer order. Throws empty_support.
RowMatrix concat_weighted(const std::vector<const RowMatrix*>& features,
                          const AlignmentWeights& weights);
RowMatrix concat_weighted(const std::vector<LowRankFeatures>& features,
                          const AlignmentWeights& weights);

/// ||X^T Q_Y||_F^2 / ||X||_F^2 where Q_Y spans range(Y). Diagnostic only.
double r_squared_diagnostic(const RowBlock& x_phi, const LabelMatrix& y);

}  // namespace sketchfer
