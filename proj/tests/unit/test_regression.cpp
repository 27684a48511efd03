#include "helpers.hpp"

#include "sketchfer/error.hpp"
#include "sketchfer/regression.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

using namespace sketchfer;
using testing::max_abs_diff;
using testing::random_matrix;

namespace {

// Normal equations through a generic LU solve, independent of the library path.
Matrix ridge_oracle(const RowMatrix& x, const RowMatrix& y, double alpha) {
  Matrix a = x.transpose() * x;
  a.diagonal().array() += alpha;
  return a.lu().solve(x.transpose() * y);
}

LabelMatrix labels_for(const std::vector<int>& y, int c) { return LabelMatrix::from_labels(y, c); }

}  // namespace

TEST_CASE("primal and dual ridge agree with the normal-equation oracle") {
  SeededRng rng(1);
  for (auto [n, d] : {std::pair<Index, Index>{40, 10}, {10, 40}, {25, 25}}) {
    const RowMatrix x = random_matrix(rng, n, d);
    const LabelMatrix y = labels_for(testing::random_labels(rng, n, 3), 3);
    const RowMatrix x_new = random_matrix(rng, 7, d);
    const RidgeModel p = fit_ridge(x, y, 0.3, RidgeMode::primal);
    const RidgeModel q = fit_ridge(x, y, 0.3, RidgeMode::dual);
    CHECK(p.mode == RidgeMode::primal);
    CHECK(q.mode == RidgeMode::dual);
    const RowMatrix oracle = x_new * ridge_oracle(x, y.data(), 0.3);
    CHECK(max_abs_diff(predict(p, x_new).scores, oracle) < 1e-10);
    CHECK(max_abs_diff(predict(q, x_new).scores, oracle) < 1e-10);
    const RidgeModel a = fit_ridge(x, y, 0.3);
    CHECK(a.mode == (n >= d ? RidgeMode::primal : RidgeMode::dual));
  }
}

TEST_CASE("ridge argument checks") {
  SeededRng rng(2);
  const RowMatrix x = random_matrix(rng, 6, 2);
  const LabelMatrix y = labels_for(testing::random_labels(rng, 6, 2), 2);
  CHECK_THROWS_AS(fit_ridge(x, y, 0.0), Error);
  CHECK_THROWS_AS(fit_ridge(x, y, -1.0), Error);
  CHECK_THROWS_AS(fit_ridge(random_matrix(rng, 5, 2), y, 1.0), Error);
  const RidgeModel m = fit_ridge(x, y, 1.0);
  CHECK_THROWS_CODE(predict(m, random_matrix(rng, 3, 3)), Errc::dimension_mismatch);
}

TEST_CASE("training residual grows with alpha") {
  SeededRng rng(3);
  const RowMatrix x = random_matrix(rng, 30, 8);
  const LabelMatrix y = labels_for(testing::random_labels(rng, 30, 3), 3);
  double prev = -1.0;
  for (double alpha : {1e-4, 1e-2, 1e-1, 1.0, 10.0, 100.0}) {
    const double r = (predict(fit_ridge(x, y, alpha), x).scores - y.data()).norm();
    CHECK(r >= prev - 1e-12);
    prev = r;
  }
}

TEST_CASE("permuting training rows leaves the weights unchanged") {
  SeededRng rng(4);
  const RowMatrix x = random_matrix(rng, 20, 5);
  const auto labels = testing::random_labels(rng, 20, 4);
  std::vector<Index> perm(20);
  for (Index i = 0; i < 20; ++i) perm[static_cast<std::size_t>(i)] = i;
  rng.shuffle(std::span<Index>(perm));
  RowMatrix xp(20, 5);
  std::vector<int> lp(20);
  for (std::size_t i = 0; i < 20; ++i) {
    xp.row(static_cast<Index>(i)) = x.row(perm[i]);
    lp[i] = labels[static_cast<std::size_t>(perm[i])];
  }
  const RidgeModel a = fit_ridge(x, labels_for(labels, 4), 0.1, RidgeMode::primal);
  const RidgeModel b = fit_ridge(xp, labels_for(lp, 4), 0.1, RidgeMode::primal);
  CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("each output column depends only on its own class indicator") {
  // Column j of W = (X^T X + aI)^{-1} X^T y_j: zeroing other columns of Y
  // through a different labeling keeps column j fixed.
  SeededRng rng(5);
  const RowMatrix x = random_matrix(rng, 24, 6);
  std::vector<int> a = testing::random_labels(rng, 24, 3);
  std::vector<int> b = a;
  for (auto& v : b) {
    if (v == 2) v = 1;  // class 0 untouched
  }
  const RidgeModel ma = fit_ridge(x, labels_for(a, 3), 0.5, RidgeMode::primal);
  const RidgeModel mb = fit_ridge(x, labels_for(b, 3), 0.5, RidgeMode::primal);
  CHECK((ma.weights.col(0) - mb.weights.col(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("argmax ties go to the lowest index") {
  RowMatrix s(2, 3);
  s << 1.0, 1.0, 0.5, 0.0, 2.0, 2.0;
  const auto p = PredictionScores::from_scores(s);
  CHECK(p.labels == std::vector<int>{0, 1});
  const LabelMatrix pl = pseudo_label(p);
  CHECK(pl.labels() == std::vector<int>{0, 1});
}

TEST_CASE("transductive fit with beta' = 0 is ridge with alpha = 1/beta") {
  SeededRng rng(6);
  for (int t = 0; t < 5; ++t) {
    const RowMatrix x = random_matrix(rng, 30, 7);
    const RowMatrix xu = random_matrix(rng, 15, 7);
    const LabelMatrix y = labels_for(testing::random_labels(rng, 30, 3), 3);
    const double beta = 0.5 + t;
    const TransductiveFit f = fit_transductive(x, y, xu, beta, 0.0, 0.01);
    const RidgeModel r = fit_ridge(x, y, 1.0 / beta, RidgeMode::primal);
    CHECK(max_abs_diff(predict(f.model, xu).scores, predict(r, xu).scores) < 1e-10);
  }
}

TEST_CASE("transductive fit matches the closed form with pseudo-labels") {
  SeededRng rng(7);
  const RowMatrix x = random_matrix(rng, 20, 4);
  const RowMatrix xu = random_matrix(rng, 12, 4);
  const LabelMatrix y = labels_for(testing::random_labels(rng, 20, 2), 2);
  const TransductiveFit f = fit_transductive(x, y, xu, 2.0, 3.0, 0.1);
  const LabelMatrix yu = pseudo_label(predict(fit_ridge(x, y, 0.1), xu));
  CHECK(f.pseudo_labels.labels() == yu.labels());
  Matrix lhs = 3.0 * xu.transpose() * xu + 2.0 * x.transpose() * x;
  lhs.diagonal().array() += 1.0;
  const Matrix w = lhs.lu().solve(3.0 * xu.transpose() * yu.data() + 2.0 * x.transpose() * y.data());
  CHECK((f.model.weights - w).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_CODE(fit_transductive(x, y, RowMatrix(0, 4), 1.0, 1.0, 0.1), Errc::no_unlabeled);
}

TEST_CASE("stratified folds balance every class") {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 10; ++k) labels.push_back(c);
  }
  const FoldAssignment f = assign_folds(labels, 3, 5, 11);
  CHECK(f.stratified);
  for (int c = 0; c < 3; ++c) {
    std::vector<int> per_fold(5, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) per_fold[static_cast<std::size_t>(f.fold[i])]++;
    }
    for (int n : per_fold) CHECK(n == 2);
  }
  CHECK(assign_folds(labels, 3, 5, 11).fold == f.fold);

  const std::vector<int> sparse{0, 0, 0, 0, 0, 1};
  const FoldAssignment g = assign_folds(sparse, 2, 3, 1);
  CHECK_FALSE(g.stratified);
  std::vector<int> sizes(3, 0);
  for (int v : g.fold) sizes[static_cast<std::size_t>(v)]++;
  CHECK(sizes == std::vector<int>{2, 2, 2});
}

TEST_CASE("alpha CV on separable data reaches full validation accuracy") {
  SeededRng rng(8);
  const auto labels = testing::random_labels(rng, 60, 3);
  RowMatrix x = 0.01 * random_matrix(rng, 60, 5);
  for (Index i = 0; i < 60; ++i) x(i, labels[static_cast<std::size_t>(i)]) += 1.0;
  const std::vector<double> grid{1e-1, 1e-2, 1e-3, 1e-4};
  const AlphaSelection s = cross_validate_alpha(x, labels_for(labels, 3), 5, grid, 3);
  REQUIRE(s.mean_accuracy.size() == 4);
  CHECK(*std::max_element(s.mean_accuracy.begin(), s.mean_accuracy.end()) == 1.0);
  // All tie at 1.0: the larger alpha wins.
  CHECK(s.alpha == 1e-1);
  const AlphaSelection one = cross_validate_alpha(x, labels_for(labels, 3), 5, {0.5}, 3);
  CHECK(one.alpha == 0.5);
  CHECK(one.mean_accuracy.empty());
}

TEST_CASE("beta CV prefers ignoring adversarial pseudo-labels") {
  SeededRng rng(9);
  const auto labels = testing::random_labels(rng, 60, 3);
  RowMatrix x = 0.3 * random_matrix(rng, 60, 6);
  for (Index i = 0; i < 60; ++i) x(i, labels[static_cast<std::size_t>(i)]) += 1.0;
  const auto ul = testing::random_labels(rng, 90, 3);
  RowMatrix xu = 0.3 * random_matrix(rng, 90, 6);
  for (Index i = 0; i < 90; ++i) xu(i, ul[static_cast<std::size_t>(i)]) += 1.0;
  // Every pseudo-label shifted to a wrong class.
  const PseudoLabeler flip = [](const PredictionScores& s) {
    std::vector<int> wrong = s.labels;
    for (auto& v : wrong) v = (v + 1) % 3;
    return LabelMatrix::from_labels(wrong, 3);
  };
  const BetaSelection b = cross_validate_betas(x, labels_for(labels, 3), xu, 5,
                                               {0.1, 1.0, 10.0}, {0.0, 0.1, 1.0, 10.0}, 0.01, 4,
                                               flip);
  CHECK(b.beta_prime == 0.0);

  const BetaSelection sup = cross_validate_betas(x, labels_for(labels, 3), xu, 5,
                                                 {0.0, 1.0, 10.0}, {0.0}, 0.01, 4);
  CHECK(sup.beta_prime == 0.0);
  CHECK(sup.beta > 0.0);  // beta = beta' = 0 is never a candidate
  CHECK(std::isnan(sup.mean_accuracy[0]));
  CHECK_THROWS_AS(cross_validate_betas(x, labels_for(labels, 3), xu, 5, {0.0}, {0.0}, 0.01, 4),
                  Error);
}

TEST_CASE("accuracy") {
  CHECK(accuracy(std::vector<int>{1, 2, 3, 4}, std::vector<int>{1, 0, 3, 0}) == 0.5);
  CHECK_THROWS_AS(accuracy(std::vector<int>{1}, std::vector<int>{1, 2}), Error);
}

TEST_CASE("model blob round trip") {
  testing::TempDir dir("model");
  SeededRng rng(10);
  const RowMatrix x = random_matrix(rng, 8, 12);
  const LabelMatrix y = labels_for(testing::random_labels(rng, 8, 2), 2);
  for (RidgeMode mode : {RidgeMode::primal, RidgeMode::dual}) {
    const RidgeModel m = fit_ridge(x, y, 0.25, mode);
    save_model(m, dir / "m.bin");
    const RidgeModel back = load_model(dir / "m.bin");
    CHECK(back.mode == m.mode);
    CHECK(back.alpha == 0.25);
    CHECK(back.class_count == 2);
    CHECK(back.weights == m.weights);
    CHECK(predict(back, x).scores == predict(m, x).scores);
  }
  {
    std::ofstream out(dir / "junk.bin", std::ios::binary);
    out << "SKFRIDGX";
  }
  CHECK_THROWS_AS(load_model(dir / "junk.bin"), Error);
}
