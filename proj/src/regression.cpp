#include "sketchfer/regression.hpp"

#include "sketchfer/error.hpp"
#include "sketchfer/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace sketchfer {

namespace {

void require_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(Errc::invalid_argument, "alpha must be positive and finite");
  }
}

Matrix spd_solve(Matrix a, const Matrix& rhs) {
  const Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(Errc::singular_system, "regularized Gram is not positive definite");
  }
  return llt.solve(rhs);
}

// Gram statistics of one design, reusable across regularization strengths.
class RidgeSystem {
 public:
  RidgeSystem(const RowBlock& x, const RowMatrix& y, RidgeMode mode) {
    mode_ = mode == RidgeMode::automatic
                ? (x.rows() >= x.cols() ? RidgeMode::primal : RidgeMode::dual)
                : mode;
    if (mode_ == RidgeMode::primal) {
      gram_ = x.transpose() * x;
      rhs_ = x.transpose() * y;
    } else {
      gram_ = x * x.transpose();
      rhs_ = y;
      design_ = x;
    }
  }

  RidgeModel fit(double alpha, int class_count) const {
    RidgeModel m;
    m.mode = mode_;
    m.alpha = alpha;
    m.class_count = class_count;
    Matrix a = gram_;
    a.diagonal().array() += alpha;
    m.weights = spd_solve(std::move(a), rhs_);
    if (mode_ == RidgeMode::dual) m.train_features = design_;
    return m;
  }

 private:
  RidgeMode mode_;
  RowMatrix design_;
  Matrix gram_;
  Matrix rhs_;
};

RowMatrix select_rows(const RowBlock& x, const std::vector<Index>& rows) {
  RowMatrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

struct Split {
  std::vector<Index> train;
  std::vector<Index> valid;
};

Split split_for(const std::vector<int>& fold, int f) {
  Split s;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    (fold[i] == f ? s.valid : s.train).push_back(static_cast<Index>(i));
  }
  return s;
}

std::vector<int> subset(const std::vector<int>& v, const std::vector<Index>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(v[static_cast<std::size_t>(r)]);
  return out;
}

void require_cv_args(const RowBlock& x, const LabelMatrix& y, int folds, std::size_t grid_size) {
  if (folds < 2) throw Error(Errc::invalid_argument, "need at least two folds");
  if (grid_size == 0) throw Error(Errc::invalid_argument, "empty grid");
  if (x.rows() != y.rows()) throw Error(Errc::sample_count_mismatch, "features vs labels");
  if (x.rows() < folds) throw Error(Errc::invalid_argument, "fewer rows than folds");
}

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(Errc::io, "truncated model file");
  return v;
}

constexpr char kModelMagic[8] = {'S', 'K', 'F', 'R', 'I', 'D', 'G', 'E'};

}  // namespace

Index RidgeModel::input_dim() const {
  return mode == RidgeMode::dual ? train_features.cols() : weights.rows();
}

PredictionScores PredictionScores::from_scores(RowMatrix scores) {
  PredictionScores p;
  p.labels.resize(static_cast<std::size_t>(scores.rows()));
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    p.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  p.scores = std::move(scores);
  return p;
}

RidgeModel fit_ridge(const RowBlock& x, const LabelMatrix& y, double alpha, RidgeMode mode) {
  require_alpha(alpha);
  if (x.rows() < 1 || x.cols() < 1) {
    throw Error(Errc::invalid_dimensions, "empty design matrix");
  }
  if (x.rows() != y.rows()) {
    throw Error(Errc::sample_count_mismatch, "design has " + std::to_string(x.rows()) +
                                                 " rows, labels " + std::to_string(y.rows()));
  }
  return RidgeSystem(x, y.data(), mode).fit(alpha, y.n_classes());
}

PredictionScores predict(const RidgeModel& model, const RowBlock& x) {
  if (x.cols() != model.input_dim()) {
    throw Error(Errc::dimension_mismatch, "input width " + std::to_string(x.cols()) +
                                              ", model expects " +
                                              std::to_string(model.input_dim()));
  }
  RowMatrix scores;
  if (model.mode == RidgeMode::dual) {
    scores = (x * model.train_features.transpose()) * model.weights;
  } else {
    scores = x * model.weights;
  }
  return PredictionScores::from_scores(std::move(scores));
}

LabelMatrix pseudo_label(const PredictionScores& scores) {
  return LabelMatrix::from_labels(scores.labels, static_cast<int>(scores.scores.cols()));
}

TransductiveFit fit_transductive(const RowBlock& x, const LabelMatrix& y,
                                 const RowBlock& x_unlabeled, double beta, double beta_prime,
                                 double alpha, const PseudoLabeler& labeler) {
  require_alpha(alpha);
  if (beta < 0.0 || beta_prime < 0.0) {
    throw Error(Errc::invalid_argument, "beta and beta' must be nonnegative");
  }
  if (beta_prime > 0.0 && x_unlabeled.rows() == 0) {
    throw Error(Errc::no_unlabeled, "beta' > 0 but no unlabeled rows were given");
  }
  if (x_unlabeled.rows() > 0 && x_unlabeled.cols() != x.cols()) {
    throw Error(Errc::dimension_mismatch, "labeled and unlabeled widths differ");
  }
  TransductiveFit out;
  out.beta = beta;
  out.beta_prime = beta_prime;

  Matrix lhs = beta * (x.transpose() * x);
  Matrix rhs = beta * (x.transpose() * y.data());
  if (x_unlabeled.rows() > 0) {
    const RidgeModel stage1 = fit_ridge(x, y, alpha);
    const PredictionScores s = predict(stage1, x_unlabeled);
    out.pseudo_labels = labeler ? labeler(s) : pseudo_label(s);
    lhs += beta_prime * (x_unlabeled.transpose() * x_unlabeled);
    rhs += beta_prime * (x_unlabeled.transpose() * out.pseudo_labels.data());
  }
  lhs.diagonal().array() += 1.0;

  out.model.mode = RidgeMode::primal;
  out.model.alpha = 1.0;
  out.model.class_count = y.n_classes();
  out.model.weights = spd_solve(std::move(lhs), rhs);
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(Errc::sample_count_mismatch, "prediction and truth lengths differ");
  }
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

FoldAssignment assign_folds(std::span<const int> labels, int n_classes, int folds,
                            std::uint64_t seed) {
  FoldAssignment out;
  out.fold.assign(labels.size(), 0);
  SeededRng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (const auto& members : by_class) {
    if (!members.empty() && members.size() < static_cast<std::size_t>(folds)) {
      out.stratified = false;
    }
  }
  if (!out.stratified) {
    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span(order));
    for (std::size_t k = 0; k < order.size(); ++k) {
      out.fold[order[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    }
    return out;
  }
  // Continue the round-robin across classes so fold sizes stay balanced.
  std::size_t next = 0;
  for (auto& members : by_class) {
    rng.shuffle(std::span(members));
    for (std::size_t idx : members) {
      out.fold[idx] = static_cast<int>(next++ % static_cast<std::size_t>(folds));
    }
  }
  return out;
}

AlphaSelection cross_validate_alpha(const RowBlock& x, const LabelMatrix& y, int folds,
                                    const std::vector<double>& grid, std::uint64_t seed) {
  if (grid.empty()) throw Error(Errc::invalid_argument, "empty alpha grid");
  for (double a : grid) require_alpha(a);
  AlphaSelection out;
  if (grid.size() == 1) {
    out.alpha = grid.front();
    return out;
  }
  require_cv_args(x, y, folds, grid.size());
  const std::vector<int> labels = y.labels();
  const FoldAssignment assignment = assign_folds(labels, y.n_classes(), folds, seed);
  out.stratified = assignment.stratified;
  if (!assignment.stratified) {
    spdlog::warn("alpha CV: a class has fewer than {} rows; using unstratified folds", folds);
  }
  out.mean_accuracy.assign(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    const Split s = split_for(assignment.fold, f);
    const RowMatrix x_tr = select_rows(x, s.train);
    const RowMatrix x_va = select_rows(x, s.valid);
    const LabelMatrix y_tr = y.select_rows(s.train);
    const std::vector<int> truth = subset(labels, s.valid);
    const RidgeSystem system(x_tr, y_tr.data(), RidgeMode::automatic);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const RidgeModel m = system.fit(grid[g], y.n_classes());
      out.mean_accuracy[g] += accuracy(predict(m, x_va).labels, truth) / folds;
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const double acc = out.mean_accuracy[g];
    if (acc > out.mean_accuracy[best] ||
        (acc == out.mean_accuracy[best] && grid[g] > grid[best])) {
      best = g;
    }
  }
  out.alpha = grid[best];
  return out;
}

BetaSelection cross_validate_betas(const RowBlock& x, const LabelMatrix& y,
                                   const RowBlock& x_unlabeled, int folds,
                                   const std::vector<double>& beta_grid,
                                   const std::vector<double>& beta_prime_grid, double alpha,
                                   std::uint64_t seed, const PseudoLabeler& labeler) {
  require_alpha(alpha);
  if (beta_grid.empty() || beta_prime_grid.empty()) {
    throw Error(Errc::invalid_argument, "empty beta grid");
  }
  for (double b : beta_grid) {
    if (b < 0.0) throw Error(Errc::invalid_argument, "negative beta");
  }
  for (double b : beta_prime_grid) {
    if (b < 0.0) throw Error(Errc::invalid_argument, "negative beta'");
    if (b > 0.0 && x_unlabeled.rows() == 0) {
      throw Error(Errc::no_unlabeled, "beta' > 0 but no unlabeled rows were given");
    }
  }
  BetaSelection out;
  const std::size_t nb = beta_grid.size();
  const std::size_t nbp = beta_prime_grid.size();
  // beta = beta' = 0 gives W = 0 whatever the data, so it is never a candidate.
  auto usable = [&](std::size_t k) {
    return beta_grid[k / nbp] > 0.0 || beta_prime_grid[k % nbp] > 0.0;
  };
  std::size_t n_usable = 0;
  for (std::size_t k = 0; k < nb * nbp; ++k) n_usable += usable(k) ? 1 : 0;
  if (n_usable == 0) {
    throw Error(Errc::invalid_argument, "beta grids allow only beta = beta' = 0");
  }
  if (nb * nbp == 1) {
    out.beta = beta_grid.front();
    out.beta_prime = beta_prime_grid.front();
    return out;
  }
  require_cv_args(x, y, folds, nb * nbp);
  const std::vector<int> labels = y.labels();
  const FoldAssignment assignment = assign_folds(labels, y.n_classes(), folds, seed);
  out.stratified = assignment.stratified;
  if (!assignment.stratified) {
    spdlog::warn("beta CV: a class has fewer than {} rows; using unstratified folds", folds);
  }
  out.mean_accuracy.assign(nb * nbp, 0.0);
  const bool has_unlabeled = x_unlabeled.rows() > 0;
  for (int f = 0; f < folds; ++f) {
    const Split s = split_for(assignment.fold, f);
    const RowMatrix x_tr = select_rows(x, s.train);
    const RowMatrix x_va = select_rows(x, s.valid);
    const LabelMatrix y_tr = y.select_rows(s.train);
    const std::vector<int> truth = subset(labels, s.valid);

    const Matrix labeled_gram = x_tr.transpose() * x_tr;
    const Matrix labeled_rhs = x_tr.transpose() * y_tr.data();
    Matrix unlabeled_gram = Matrix::Zero(x.cols(), x.cols());
    Matrix unlabeled_rhs = Matrix::Zero(x.cols(), y.n_classes());
    if (has_unlabeled) {
      const PredictionScores stage1 = predict(fit_ridge(x_tr, y_tr, alpha), x_unlabeled);
      const LabelMatrix pseudo = labeler ? labeler(stage1) : pseudo_label(stage1);
      unlabeled_gram = x_unlabeled.transpose() * x_unlabeled;
      unlabeled_rhs = x_unlabeled.transpose() * pseudo.data();
    }
    for (std::size_t i = 0; i < nb; ++i) {
      for (std::size_t j = 0; j < nbp; ++j) {
        if (!usable(i * nbp + j)) continue;
        Matrix lhs = beta_grid[i] * labeled_gram + beta_prime_grid[j] * unlabeled_gram;
        lhs.diagonal().array() += 1.0;
        const Matrix rhs = beta_grid[i] * labeled_rhs + beta_prime_grid[j] * unlabeled_rhs;
        RidgeModel m;
        m.mode = RidgeMode::primal;
        m.class_count = y.n_classes();
        m.weights = spd_solve(std::move(lhs), rhs);
        out.mean_accuracy[i * nbp + j] += accuracy(predict(m, x_va).labels, truth) / folds;
      }
    }
  }
  std::size_t best = 0;
  while (!usable(best)) ++best;
  for (std::size_t k = 0; k < nb * nbp; ++k) {
    if (!usable(k)) {
      out.mean_accuracy[k] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double acc = out.mean_accuracy[k];
    const double best_acc = out.mean_accuracy[best];
    if (acc > best_acc ||
        (acc == best_acc && beta_prime_grid[k % nbp] < beta_prime_grid[best % nbp])) {
      best = k;
    }
  }
  out.beta = beta_grid[best / nbp];
  out.beta_prime = beta_prime_grid[best % nbp];
  return out;
}

void save_model(const RidgeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out.write(kModelMagic, 8);
  write_pod<std::uint32_t>(out, 1);
  write_pod<std::uint32_t>(out, model.mode == RidgeMode::dual ? 1U : 0U);
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(model.weights.rows()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(model.weights.cols()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(model.train_features.rows()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(model.train_features.cols()));
  write_pod<double>(out, model.alpha);
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(model.class_count));
  const RowMatrix w = model.weights;
  out.write(reinterpret_cast<const char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(double)));
  if (model.mode == RidgeMode::dual) {
    out.write(reinterpret_cast<const char*>(model.train_features.data()),
              static_cast<std::streamsize>(model.train_features.size() * sizeof(double)));
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

RidgeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_file, path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kModelMagic, 8) != 0) {
    throw Error(Errc::io, path.string() + ": not a ridge model file");
  }
  if (read_pod<std::uint32_t>(in) != 1) throw Error(Errc::io, "unsupported model version");
  RidgeModel m;
  m.mode = read_pod<std::uint32_t>(in) == 1 ? RidgeMode::dual : RidgeMode::primal;
  const auto wr = static_cast<Index>(read_pod<std::uint64_t>(in));
  const auto wc = static_cast<Index>(read_pod<std::uint64_t>(in));
  const auto fr = static_cast<Index>(read_pod<std::uint64_t>(in));
  const auto fc = static_cast<Index>(read_pod<std::uint64_t>(in));
  m.alpha = read_pod<double>(in);
  m.class_count = static_cast<int>(read_pod<std::uint64_t>(in));
  RowMatrix w(wr, wc);
  in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
  m.weights = w;
  if (m.mode == RidgeMode::dual) {
    m.train_features.resize(fr, fc);
    in.read(reinterpret_cast<char*>(m.train_features.data()),
            static_cast<std::streamsize>(m.train_features.size() * sizeof(double)));
  }
  if (!in) throw Error(Errc::io, path.string() + ": truncated payload");
  return m;
}

}  // namespace sketchfer
