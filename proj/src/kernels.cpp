#include "sketchfer/kernels.hpp"

#include "sketchfer/error.hpp"
#include "sketchfer/random.hpp"
#include "sketchfer/row_source.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sketchfer {

namespace {

RowMatrix rbf_from_norms(const RowBlock& a, const Vector& a_sq, const RowBlock& b,
                         const Vector& b_sq, double sigma_sq) {
  RowMatrix k = a * b.transpose();
  const double scale = -0.5 / sigma_sq;
  for (Index i = 0; i < k.rows(); ++i) {
    for (Index j = 0; j < k.cols(); ++j) {
      const double d2 = std::max(0.0, a_sq(i) + b_sq(j) - 2.0 * k(i, j));
      k(i, j) = std::exp(scale * d2);
    }
  }
  return k;
}

void require_positive_sigma(double sigma_sq) {
  if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq)) {
    throw Error(Errc::invalid_argument, "sigma^2 must be positive and finite");
  }
}

}  // namespace

RowMatrix rbf_kernel(const RowBlock& a, const RowBlock& b, double sigma_sq) {
  require_positive_sigma(sigma_sq);
  if (a.cols() != b.cols()) {
    throw Error(Errc::dimension_mismatch, "kernel arguments differ in width");
  }
  return rbf_from_norms(a, a.rowwise().squaredNorm(), b, b.rowwise().squaredNorm(), sigma_sq);
}

double rbf_sigma_heuristic(const RowBlock& x_phi) {
  if (x_phi.rows() == 0) {
    throw Error(Errc::degenerate_features, "no rows");
  }
  const double s = x_phi.rowwise().squaredNorm().maxCoeff() / 2.0;
  if (!(s > 0.0)) {
    throw Error(Errc::degenerate_features, "all feature rows are zero");
  }
  return s;
}

RbfFeatureMap fit_rbf_nystrom(const RowMatrix& x_phi, const SketchSpec& spec, double sigma_sq,
                              double eig_tol) {
  require_positive_sigma(sigma_sq);
  if (spec.n_input() != x_phi.rows()) {
    throw Error(Errc::dimension_mismatch, "sketch hashes " + std::to_string(spec.n_input()) +
                                              " rows, features have " +
                                              std::to_string(x_phi.rows()));
  }
  RbfFeatureMap map;
  map.sigma_sq = sigma_sq;
  map.landmarks = sketch_rows(spec, x_phi);
  map.landmark_sq_norms = map.landmarks.rowwise().squaredNorm();
  const Matrix w = rbf_from_norms(map.landmarks, map.landmark_sq_norms, map.landmarks,
                                  map.landmark_sq_norms, sigma_sq);
  const PinvHalf ph = pinv_half(w, eig_tol);
  if (ph.rank() == 0) {
    throw Error(Errc::degenerate_features, "landmark kernel is numerically zero");
  }
  map.whitener = ph.whitener();
  map.kept_rank = ph.rank();
  return map;
}

RowMatrix transform(const RbfFeatureMap& map, const RowBlockSource& x) {
  if (x.cols() != map.input_dim()) {
    throw Error(Errc::dimension_mismatch, "input width " + std::to_string(x.cols()) +
                                              " does not match landmarks " +
                                              std::to_string(map.input_dim()));
  }
  RowMatrix out(x.rows(), map.kept_rank);
  Index at = 0;
  x.for_each_block([&](const RowBlock& block) {
    const RowMatrix k = rbf_from_norms(block, block.rowwise().squaredNorm(), map.landmarks,
                                       map.landmark_sq_norms, map.sigma_sq);
    out.middleRows(at, block.rows()).noalias() = k * map.whitener;
    at += block.rows();
  });
  return out;
}

RowMatrix transform(const RbfFeatureMap& map, const RowMatrix& x) {
  return transform(map, MatrixBlockSource(x));
}

double median_bandwidth(const RowBlock& x, std::size_t max_pairs, std::uint64_t seed) {
  const Index n = x.rows();
  if (n < 2) {
    throw Error(Errc::single_sample, "median bandwidth needs at least two rows");
  }
  const auto total_pairs = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
  std::vector<double> d2;
  if (max_pairs == 0 || total_pairs <= max_pairs) {
    d2.reserve(total_pairs);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) d2.push_back((x.row(i) - x.row(j)).squaredNorm());
    }
  } else {
    SeededRng rng(seed);
    d2.reserve(max_pairs);
    while (d2.size() < max_pairs) {
      const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      if (i != j) d2.push_back((x.row(i) - x.row(j)).squaredNorm());
    }
  }
  const std::size_t mid = d2.size() / 2;
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid), d2.end());
  const double upper = d2[mid];
  if (d2.size() % 2 == 1) return upper;
  const double lower = *std::max_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<RbfFeatureMap> rbf_kernel_bank(const RowMatrix& x, double gamma, int p_lo, int p_hi,
                                           const SketchSpec& spec, double eig_tol) {
  if (!(gamma > 0.0)) {
    throw Error(Errc::degenerate_features, "median bandwidth is zero");
  }
  if (p_lo > p_hi) {
    throw Error(Errc::invalid_argument, "empty bandwidth exponent range");
  }
  std::vector<RbfFeatureMap> bank;
  bank.reserve(static_cast<std::size_t>(p_hi - p_lo + 1));
  for (int p = p_lo; p <= p_hi; ++p) {
    // 2 sigma^2 = 2^p gamma
    const double sigma_sq = std::ldexp(gamma, p - 1);
    bank.push_back(with_stage("bank p=" + std::to_string(p),
                              [&] { return fit_rbf_nystrom(x, spec, sigma_sq, eig_tol); }));
  }
  return bank;
}

}  // namespace sketchfer
