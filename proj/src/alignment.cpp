#include "sketchfer/alignment.hpp"

#include "sketchfer/error.hpp"

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace sketchfer {

namespace {

constexpr Index kExplicitKernelRows = 4096;

std::vector<const RowMatrix*> views(const std::vector<LowRankFeatures>& features) {
  std::vector<const RowMatrix*> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(&f.data);
  return out;
}

double qp_objective(const Matrix& m, const Vector& a, const Vector& v) {
  return v.dot(m * v) - 2.0 * v.dot(a);
}

// Exact minimizer restricted to `active`, or empty if infeasible.
Vector solve_on_support(const Matrix& m, const Vector& a, const std::vector<Index>& active) {
  const auto k = static_cast<Index>(active.size());
  Matrix sub(k, k);
  Vector rhs(k);
  for (Index i = 0; i < k; ++i) {
    rhs(i) = a(active[i]);
    for (Index j = 0; j < k; ++j) sub(i, j) = m(active[i], active[j]);
  }
  const Eigen::LDLT<Matrix> ldlt(sub);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return {};
  const Vector sol = ldlt.solve(rhs);
  if (!sol.allFinite() || (sub * sol - rhs).norm() > 1e-10 * std::max(1.0, rhs.norm())) return {};
  Vector v = Vector::Zero(a.size());
  for (Index i = 0; i < k; ++i) {
    if (sol(i) <= 0.0) return {};
    v(active[i]) = sol(i);
  }
  return v;
}

}  // namespace

AlignmentProblem build_gram_stats(const std::vector<const RowMatrix*>& features,
                                  const LabelMatrix& y) {
  if (features.empty()) {
    throw Error(Errc::invalid_argument, "no layers to align");
  }
  const auto n_layers = static_cast<Index>(features.size());
  for (Index l = 0; l < n_layers; ++l) {
    if (features[l]->rows() != y.rows()) {
      throw Error(Errc::sample_count_mismatch,
                  "layer " + std::to_string(l) + " has " + std::to_string(features[l]->rows()) +
                      " rows, labels have " + std::to_string(y.rows()));
    }
  }
  AlignmentProblem p;
  p.gram.resize(n_layers, n_layers);
  p.target.resize(n_layers);

  // Cross products cost about N (sum r)^2 / 2 flops, explicit N x N kernels
  // about N^2 (sum r + L^2 / 2). Wide feature sets take the second route.
  const double n = static_cast<double>(y.rows());
  double total_cols = 0.0;
  for (const auto* f : features) total_cols += static_cast<double>(f->cols());
  const double half_l_sq = 0.5 * static_cast<double>(n_layers * n_layers);
  if (y.rows() <= kExplicitKernelRows &&
      n * (total_cols + half_l_sq) < 0.5 * total_cols * total_cols) {
    const Index rows = y.rows();
    std::vector<Matrix> kernels;
    kernels.reserve(features.size());
    for (const auto* f : features) {
      Matrix k = Matrix::Zero(rows, rows);
      k.selfadjointView<Eigen::Lower>().rankUpdate(Matrix(*f));
      kernels.push_back(k.selfadjointView<Eigen::Lower>());
    }
    const Matrix yyt = y.data() * y.data().transpose();
    for (Index k = 0; k < n_layers; ++k) {
      p.target(k) = kernels[k].cwiseProduct(yyt).sum();
      for (Index l = k; l < n_layers; ++l) {
        const double v = kernels[k].cwiseProduct(kernels[l]).sum();
        p.gram(k, l) = v;
        p.gram(l, k) = v;
      }
    }
    return p;
  }
  for (Index k = 0; k < n_layers; ++k) {
    p.target(k) = (features[k]->transpose() * y.data()).squaredNorm();
    for (Index l = k; l < n_layers; ++l) {
      const double v = (features[k]->transpose() * *features[l]).squaredNorm();
      p.gram(k, l) = v;
      p.gram(l, k) = v;
    }
  }
  return p;
}

AlignmentProblem build_gram_stats(const std::vector<LowRankFeatures>& features,
                                  const LabelMatrix& y) {
  return build_gram_stats(views(features), y);
}

double alignment_objective(const AlignmentProblem& problem, const Vector& mu) {
  const double norm_sq = mu.dot(problem.gram * mu);
  if (norm_sq <= 0.0) return 0.0;
  return mu.dot(problem.target) / std::sqrt(norm_sq);
}

double kkt_residual(const AlignmentProblem& problem, const Vector& v) {
  const Vector g = 2.0 * (problem.gram * v - problem.target);
  double worst = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    worst = std::max(worst, v(i) > 0.0 ? std::abs(g(i)) : std::max(0.0, -g(i)));
  }
  return worst;
}

AlignmentWeights solve_nn_quadratic(const AlignmentProblem& problem, const QpOptions& opts) {
  const Matrix& m = problem.gram;
  const Vector& a = problem.target;
  const Index n = a.size();
  if (n == 0 || m.rows() != n || m.cols() != n) {
    throw Error(Errc::invalid_dimensions, "alignment problem is malformed");
  }
  if ((a.array() < 0.0).any() || !a.allFinite() || !m.allFinite()) {
    throw Error(Errc::invalid_argument, "target statistics must be finite and nonnegative");
  }
  if (a.maxCoeff() == 0.0) {
    throw Error(Errc::no_signal, "every layer is orthogonal to the labels");
  }

  AlignmentWeights out;
  // Iterate on a rescaled problem (M / s, a / s); v* is unchanged.
  const double lambda_max = Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly)
                                .eigenvalues()
                                .maxCoeff();
  if (!(lambda_max > 0.0)) {
    throw Error(Errc::no_signal, "layer Gram statistics vanish");
  }
  const Matrix ms = m / lambda_max;
  const Vector as = a / lambda_max;

  Vector v = Vector::Zero(n);
  double prev = qp_objective(ms, as, v);
  out.converged = false;
  long it = 0;
  for (; it < opts.max_iter; ++it) {
    v = (v - (ms * v - as)).cwiseMax(0.0);
    const double obj = qp_objective(ms, as, v);
    if (std::abs(prev - obj) < opts.tol * std::max(1.0, std::abs(obj))) {
      out.converged = true;
      ++it;
      break;
    }
    prev = obj;
  }
  out.iterations = it;

  // Polish: exact solve on the support found by the gradient iterations,
  // accepted only if it is feasible and no worse.
  std::vector<Index> active;
  for (Index i = 0; i < n; ++i) {
    if (v(i) > 0.0) active.push_back(i);
  }
  if (!active.empty()) {
    const Vector polished = solve_on_support(ms, as, active);
    if (polished.size() == n && qp_objective(ms, as, polished) <= qp_objective(ms, as, v)) {
      v = polished;
    }
  }
  if (!out.converged) {
    spdlog::warn("alignment QP hit max_iter={} (KKT residual {:.3e}); using best iterate",
                 opts.max_iter, kkt_residual({ms, as}, v));
  }
  if (v.maxCoeff() <= 0.0) {
    throw Error(Errc::no_signal, "QP solution is zero");
  }

  Vector mu = v / v.norm();
  const double cutoff = opts.support_eps * mu.maxCoeff();
  for (Index i = 0; i < n; ++i) {
    if (mu(i) < cutoff) mu(i) = 0.0;
  }
  mu /= mu.norm();
  for (Index i = 0; i < n; ++i) {
    if (mu(i) > 0.0) out.support.push_back(i);
  }
  out.v = v;
  out.mu = std::move(mu);
  out.objective = alignment_objective(problem, out.mu);
  return out;
}

double alignment_score(const KernelStats& stats) {
  if (!(stats.frobenius_norm > 0.0)) {
    throw Error(Errc::zero_kernel, "kernel has zero Frobenius norm");
  }
  return stats.inner_with_target / stats.frobenius_norm;
}

KernelStats kernel_stats(const RowBlock& factor, const LabelMatrix& y) {
  if (factor.rows() != y.rows()) {
    throw Error(Errc::sample_count_mismatch, "factor and labels differ in row count");
  }
  const Matrix ftf = factor.transpose() * factor;
  return {(factor.transpose() * y.data()).squaredNorm(), ftf.norm()};
}

RowMatrix concat_weighted(const std::vector<const RowMatrix*>& features,
                          const AlignmentWeights& weights) {
  if (weights.mu.size() != static_cast<Index>(features.size())) {
    throw Error(Errc::dimension_mismatch, "weight count differs from layer count");
  }
  if (weights.support.empty()) {
    throw Error(Errc::empty_support, "no layer has positive weight");
  }
  Index rows = features[weights.support.front()]->rows();
  Index width = 0;
  for (Index l : weights.support) {
    if (features[l]->rows() != rows) {
      throw Error(Errc::sample_count_mismatch, "layers differ in row count");
    }
    width += features[l]->cols();
  }
  RowMatrix out(rows, width);
  Index at = 0;
  for (Index l : weights.support) {
    const auto w = features[l]->cols();
    out.middleCols(at, w) = std::sqrt(weights.mu(l)) * *features[l];
    at += w;
  }
  return out;
}

RowMatrix concat_weighted(const std::vector<LowRankFeatures>& features,
                          const AlignmentWeights& weights) {
  return concat_weighted(views(features), weights);
}

double r_squared_diagnostic(const RowBlock& x_phi, const LabelMatrix& y) {
  if (x_phi.rows() != y.rows()) {
    throw Error(Errc::sample_count_mismatch, "features and labels differ in row count");
  }
  const double total = x_phi.squaredNorm();
  if (total == 0.0) return 0.0;
  // Orthonormal basis of range(Y) = eigenvectors of YY^T with nonzero eigenvalue.
  Eigen::ColPivHouseholderQR<Matrix> qr(y.data());
  const Index rank = qr.rank();
  const Matrix q = Matrix(qr.householderQ()).leftCols(rank);
  return (x_phi.transpose() * q).squaredNorm() / total;
}

}  // namespace sketchfer
