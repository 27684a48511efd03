#include "sketchfer/lowrank.hpp"

#include "sketchfer/error.hpp"
#include "sketchfer/row_source.hpp"

#include <Eigen/Eigenvalues>

#include <string>

namespace sketchfer {

Matrix PinvHalf::whitener() const { return basis * inv_sqrt_eigs.asDiagonal(); }

PinvHalf pinv_half(const Matrix& c, double eig_tol) {
  if (c.rows() != c.cols()) {
    throw Error(Errc::not_symmetric, "matrix is not square");
  }
  if (!(eig_tol > 0.0 && eig_tol < 1.0)) {
    throw Error(Errc::invalid_argument, "eig_tol must lie in (0, 1)");
  }
  const double scale = c.cwiseAbs().maxCoeff();
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw Error(Errc::not_symmetric, "asymmetry exceeds 1e-8 relative");
  }
  PinvHalf out;
  if (c.size() == 0 || scale == 0.0) {
    out.basis.resize(c.rows(), 0);
    return out;
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
  if (eig.info() != Eigen::Success) {
    throw Error(Errc::degenerate_sketch, "eigendecomposition failed");
  }
  const Vector& values = eig.eigenvalues();  // ascending
  const Index n = values.size();
  out.lambda_max = values(n - 1);
  Index kept = 0;
  if (out.lambda_max > 0.0) {
    const double cutoff = eig_tol * out.lambda_max;
    while (kept < n && values(n - 1 - kept) >= cutoff && values(n - 1 - kept) > 0.0) ++kept;
  }
  out.basis.resize(c.rows(), kept);
  out.inv_sqrt_eigs.resize(kept);
  for (Index k = 0; k < kept; ++k) {
    out.basis.col(k) = eig.eigenvectors().col(n - 1 - k);
    out.inv_sqrt_eigs(k) = 1.0 / std::sqrt(values(n - 1 - k));
  }
  return out;
}

LowRankFeatures nystrom_linear_features(const RowBlockSource& x, const SketchSpec& spec,
                                        double eig_tol, int layer_id) {
  if (spec.n_input() != x.rows()) {
    throw Error(Errc::dimension_mismatch, "sketch hashes " + std::to_string(spec.n_input()) +
                                              " rows, layer has " + std::to_string(x.rows()));
  }
  const RowMatrix sketched = sketch_rows(spec, x);  // M x d
  const Matrix gram = sketched * sketched.transpose();
  const PinvHalf ph = pinv_half(gram, eig_tol);
  if (ph.rank() == 0) {
    throw Error(Errc::degenerate_sketch,
                "layer " + std::to_string(layer_id) + " sketch has no positive eigenvalue");
  }

  LowRankFeatures out;
  out.projection = sketched.transpose() * ph.whitener();
  out.layer_id = layer_id;
  out.kept_rank = ph.rank();
  out.eig_tol = eig_tol;
  out.data = project_rows(out, x);
  return out;
}

RowMatrix project_rows(const LowRankFeatures& features, const RowBlockSource& x) {
  if (x.cols() != features.projection.rows()) {
    throw Error(Errc::dimension_mismatch, "layer width " + std::to_string(x.cols()) +
                                              " does not match projection " +
                                              std::to_string(features.projection.rows()));
  }
  RowMatrix out(x.rows(), features.projection.cols());
  Index at = 0;
  x.for_each_block([&](const RowBlock& block) {
    out.middleRows(at, block.rows()).noalias() = block * features.projection;
    at += block.rows();
  });
  return out;
}

}  // namespace sketchfer
