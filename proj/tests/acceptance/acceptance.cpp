// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "sketchfer/alignment.hpp"
#include "sketchfer/calibration.hpp"
#include "sketchfer/kernels.hpp"
#include "sketchfer/lowrank.hpp"
#include "sketchfer/manifest.hpp"
#include "sketchfer/pipeline.hpp"
#include "sketchfer/random.hpp"
#include "sketchfer/regression.hpp"
#include "sketchfer/results.hpp"
#include "sketchfer/row_source.hpp"
#include "sketchfer/sketch.hpp"
#include "synth.hpp"

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace sketchfer;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RowMatrix gaussian(SeededRng& rng, Index rows, Index cols) {
  RowMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

std::vector<int> balanced(SeededRng& rng, Index n, int c) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(i % c);
  rng.shuffle(std::span<int>(y));
  return y;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch_dir() {
  static const fs::path dir =
      fs::temp_directory_path() / ("sketchfer_acceptance_" + std::to_string(::getpid()));
  return dir;
}

// Columns share a common component so every pair has a clearly nonzero inner
// product; relative error is meaningless for near-orthogonal pairs.
Outcome sketch_unbiasedness() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr Index n = 64, d = 16, m = 32, s = 4;
  constexpr int seeds = 1000, pairs = 20;
  SeededRng rng(2024);
  const RowMatrix common = gaussian(rng, n, 1);
  RowMatrix x = gaussian(rng, n, d) * 0.5;
  x.colwise() += common.col(0);

  std::vector<std::pair<Index, Index>> chosen;
  for (Index a = 0; a < d && static_cast<int>(chosen.size()) < pairs; ++a) {
    for (Index b = a + 1; b < d && static_cast<int>(chosen.size()) < pairs; b += 3) {
      chosen.emplace_back(a, b);
    }
  }
  const Matrix exact = x.transpose() * x;
  Matrix sum = Matrix::Zero(d, d);
  for (int k = 0; k < seeds; ++k) {
    const RowMatrix sx = sketch_rows(make_sketch(static_cast<std::uint64_t>(k), n, m, s), x);
    sum += sx.transpose() * sx;
  }
  double worst = 0.0;
  for (auto [a, b] : chosen) {
    worst = std::max(worst, std::abs(sum(a, b) / seeds - exact(a, b)) / std::abs(exact(a, b)));
  }
  const double secs = seconds_since(t0);
  return {worst < 0.05 && secs < 10.0 && static_cast<int>(chosen.size()) == pairs,
          fmt("worst relative bias %.4f over %d pairs (< 0.05), %.2f s (< 10 s)", worst,
              static_cast<int>(chosen.size()), secs)};
}

Outcome materialized_equivalence() {
  SeededRng rng(7);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index stacks = 1 + static_cast<Index>(rng.below(4));
    const Index buckets = stacks * (1 + static_cast<Index>(rng.below(16)));
    const Index n = 1 + static_cast<Index>(rng.below(300));
    const Index d = 1 + static_cast<Index>(rng.below(20));
    const RowMatrix x = gaussian(rng, n, d);
    const SketchSpec spec = make_sketch(rng.next(), n, buckets, stacks);
    const RowMatrix dense = Matrix(materialize(spec)) * x;
    const RowMatrix streamed = sketch_rows(spec, MatrixBlockSource(x, 1 + t % 37));
    worst = std::max(worst, (dense - streamed).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-12, fmt("max |S X - sketch_rows| = %.3g (< 1e-12), 100 instances", worst)};
}

Outcome nystrom_linear_exactness() {
  SeededRng rng(11);
  double worst_lowrank = 0.0, worst_identity = 0.0;
  for (int t = 0; t < 10; ++t) {
    const RowMatrix x = gaussian(rng, 200, 8) * gaussian(rng, 8, 100);
    const Matrix exact = x * x.transpose();
    const auto f = nystrom_linear_features(MatrixBlockSource(x), make_sketch(rng.next(), 200, 32, 4));
    worst_lowrank =
        std::max(worst_lowrank, (Matrix(f.data * f.data.transpose()) - exact).norm() / exact.norm());

    const RowMatrix full = gaussian(rng, 200, 100);
    const Matrix exact_full = full * full.transpose();
    const auto g = nystrom_linear_features(MatrixBlockSource(full), SketchSpec::identity(200));
    worst_identity = std::max(
        worst_identity, (Matrix(g.data * g.data.transpose()) - exact_full).norm() / exact_full.norm());
  }
  return {worst_lowrank < 1e-6 && worst_identity < 1e-10,
          fmt("rank-8 rel Gram error %.3g (< 1e-6), identity sketch %.3g (< 1e-10)", worst_lowrank,
              worst_identity)};
}

// Kernel statistics from correlated random layers and random labels.
AlignmentProblem random_problem(SeededRng& rng, Index layers) {
  const Index n = 60;
  const RowMatrix shared = gaussian(rng, n, 3);
  std::vector<RowMatrix> feats;
  for (Index l = 0; l < layers; ++l) {
    const Index r = 2 + static_cast<Index>(rng.below(6));
    RowMatrix f = gaussian(rng, n, r);
    f.leftCols(std::min<Index>(3, r)) += (1.0 + rng.uniform()) * shared.leftCols(std::min<Index>(3, r));
    feats.push_back(f);
  }
  std::vector<const RowMatrix*> ptrs;
  for (const auto& f : feats) ptrs.push_back(&f);
  const auto y = LabelMatrix::from_labels(balanced(rng, n, 3), 3);
  return build_gram_stats(ptrs, y);
}

Outcome qp_optimality() {
  SeededRng rng(13);
  double worst_gap = 0.0, worst_kkt = 0.0;
  int instances = 0;
  for (Index layers : {2, 3}) {
    for (int t = 0; t < 50; ++t, ++instances) {
      const AlignmentProblem p = random_problem(rng, layers);
      const AlignmentWeights w = solve_nn_quadratic(p);
      double best = 0.0;
      for (int k = 0; k < 10'000; ++k) {
        Vector mu(layers);
        for (Index i = 0; i < layers; ++i) mu(i) = std::abs(rng.normal());
        best = std::max(best, alignment_objective(p, mu / mu.norm()));
      }
      // Fine grid over the nonnegative part of the sphere.
      const int steps = layers == 2 ? 20'000 : 300;
      for (int i = 0; i <= steps; ++i) {
        const double th = 0.5 * M_PI * i / steps;
        if (layers == 2) {
          Vector mu(2);
          mu << std::cos(th), std::sin(th);
          best = std::max(best, alignment_objective(p, mu));
          continue;
        }
        for (int j = 0; j <= steps; ++j) {
          const double ph = 0.5 * M_PI * j / steps;
          Vector mu(3);
          mu << std::cos(th), std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph);
          best = std::max(best, alignment_objective(p, mu));
        }
      }
      worst_gap = std::max(worst_gap, (best - w.objective) / best);
      // Residual on the problem scaled to lambda_max(M) = 1; v* is scale-free.
      const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(p.gram, Eigen::EigenvaluesOnly)
                              .eigenvalues()
                              .maxCoeff();
      AlignmentProblem scaled{p.gram / lmax, p.target / lmax};
      worst_kkt = std::max(worst_kkt, kkt_residual(scaled, w.v));
    }
  }
  return {worst_gap <= 1e-6 && worst_kkt < 1e-8,
          fmt("%d instances: best sampled objective exceeds ours by at most %.2g relative "
              "(<= 1e-6), KKT residual %.2g (< 1e-8)",
              instances, std::max(worst_gap, 0.0), worst_kkt)};
}

Outcome mu_concentration() {
  int hits = 0;
  std::string values;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    synth::SynthOptions o;
    o.layers = {{64, 0.0}, {128, 0.0}, {256, 3.0}, {96, 0.0}};
    o.seed = seed;
    const fs::path dir = scratch_dir() / ("mu_" + std::to_string(seed));
    const Manifest m = load_manifest(synth::write_synthetic(dir, o));
    RunConfig cfg;
    cfg.portions = {1.0};
    cfg.trials = 1;
    cfg.seed = seed;
    cfg.skip_rbf = true;  // mu is fixed before the RBF step
    cfg.out_dir = dir / "out";
    const RunResult r = run_supervised(cfg, m);
    const double mu = r.trials[0].mu[2];
    hits += mu > 0.99 ? 1 : 0;
    values += fmt("%s%.4f", values.empty() ? "" : " ", mu);
  }
  return {hits >= 4, fmt("signal-layer mu per seed: %s; %d of 5 above 0.99 (need >= 4)",
                         values.c_str(), hits)};
}

Outcome rbf_full_landmarks() {
  SeededRng rng(17);
  double worst_err = 0.0, worst_eig = 0.0;
  for (int t = 0; t < 5; ++t) {
    RowMatrix x = gaussian(rng, 150, 5);
    x.col(0).array() += 2.0 * (rng.uniform() - 0.5);
    const double s2 = rbf_sigma_heuristic(x);
    const RbfFeatureMap map = fit_rbf_nystrom(x, SketchSpec::identity(150), s2);
    const RowMatrix z = transform(map, x);
    const Matrix approx = z * z.transpose();
    const Matrix exact = rbf_kernel(x, x, s2);
    worst_err = std::max(worst_err, (approx - exact).norm() / exact.norm());
    worst_eig = std::min(
        worst_eig,
        Eigen::SelfAdjointEigenSolver<Matrix>(approx, Eigen::EigenvaluesOnly).eigenvalues().minCoeff());
  }
  return {worst_err < 1e-6 && worst_eig >= -1e-8,
          fmt("rel kernel error %.3g (< 1e-6), min eigenvalue %.3g (>= -1e-8)", worst_err,
              worst_eig)};
}

Outcome ridge_primal_dual() {
  SeededRng rng(19);
  double worst = 0.0;
  int wide = 0;
  for (int t = 0; t < 100; ++t) {
    const Index n = 5 + static_cast<Index>(rng.below(80));
    const Index d = 5 + static_cast<Index>(rng.below(80));
    wide += n < d ? 1 : 0;
    const int c = 2 + static_cast<int>(rng.below(5));
    const RowMatrix x = gaussian(rng, n, d);
    const auto y = LabelMatrix::from_labels(balanced(rng, n, c), c);
    const double alpha = std::pow(10.0, -4.0 + 4.0 * rng.uniform());
    const RowMatrix q = gaussian(rng, 10, d);
    const RowMatrix a = predict(fit_ridge(x, y, alpha, RidgeMode::primal), q).scores;
    const RowMatrix b = predict(fit_ridge(x, y, alpha, RidgeMode::dual), q).scores;
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-8 && wide > 0 && wide < 100,
          fmt("max prediction gap %.3g (< 1e-8), %d of 100 instances with N < D", worst, wide)};
}

Outcome transductive_reduction() {
  SeededRng rng(23);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index n = 20 + static_cast<Index>(rng.below(60));
    const Index d = 3 + static_cast<Index>(rng.below(30));
    const RowMatrix x = gaussian(rng, n, d);
    const RowMatrix xu = gaussian(rng, 15, d);
    const auto y = LabelMatrix::from_labels(balanced(rng, n, 3), 3);
    const double alpha = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
    const TransductiveFit f = fit_transductive(x, y, xu, 1.0 / alpha, 0.0, 0.1);
    const RidgeModel r = fit_ridge(x, y, alpha, RidgeMode::primal);
    const RowMatrix q = gaussian(rng, 10, d);
    worst = std::max(worst, (predict(f.model, q).scores - predict(r, q).scores).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-10, fmt("max prediction gap %.3g (< 1e-10), 20 instances", worst)};
}

// Independent ECE: each sample binned by scanning the right-closed edges.
double ece_oracle(const RowMatrix& p, const std::vector<int>& y, int bins) {
  std::vector<double> conf(bins, 0.0), hit(bins, 0.0), count(bins, 0.0);
  for (Index i = 0; i < p.rows(); ++i) {
    Index pred = 0;
    for (Index j = 1; j < p.cols(); ++j) {
      if (p(i, j) > p(i, pred)) pred = j;
    }
    const double c = p(i, pred);
    int b = 0;
    while (b < bins - 1 && !(c <= static_cast<double>(b + 1) / bins)) ++b;
    conf[b] += c;
    hit[b] += pred == y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    count[b] += 1.0;
  }
  double e = 0.0;
  for (int b = 0; b < bins; ++b) {
    if (count[b] > 0.0) {
      e += count[b] / static_cast<double>(p.rows()) * std::abs(hit[b] / count[b] - conf[b] / count[b]);
    }
  }
  return e;
}

Outcome ece_and_temperature() {
  SeededRng rng(29);
  int mismatches = 0, label_changes = 0, worse = 0;
  const auto grid = default_temperature_grid();
  for (int t = 0; t < 50; ++t) {
    const Index n = 50 + static_cast<Index>(rng.below(400));
    const int c = 2 + static_cast<int>(rng.below(9));
    RowMatrix raw = gaussian(rng, n, c) * (0.1 + 5.0 * rng.uniform());
    std::vector<int> y = balanced(rng, n, c);
    // Make scores informative so both over- and under-confidence occur.
    for (Index i = 0; i < n; ++i) raw(i, y[static_cast<std::size_t>(i)]) += rng.uniform() * 2.0;
    const auto scores = PredictionScores::from_scores(raw);
    const RowMatrix probs = scores_to_confidence(scores, 1.0);
    if (ece(probs, y, kDefaultBins).ece != ece_oracle(probs, y, kDefaultBins)) ++mismatches;
    const TemperatureFit fit = fit_temperature(scores, y, grid);
    if (PredictionScores::from_scores(scores_to_confidence(scores, fit.t)).labels != scores.labels) {
      ++label_changes;
    }
    if (fit.ece > fit.baseline_ece) ++worse;
  }
  return {mismatches == 0 && label_changes == 0 && worse == 0,
          fmt("50 instances: %d oracle mismatches, %d label changes, %d fits above the t=1 ECE",
              mismatches, label_changes, worse)};
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  double pipeline_secs = 0.0;
  bool ok = true;
  std::string rows;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    synth::SynthOptions o;
    o.layers = {{64, 1.0}, {128, 2.0}, {256, 3.0}, {96, 2.0}};
    o.seed = 100 + seed;
    const fs::path dir = scratch_dir() / ("e2e_" + std::to_string(seed));
    const Manifest m = load_manifest(synth::write_synthetic(dir, o));

    RunConfig cfg;
    cfg.portions = {1.0};
    cfg.trials = 1;
    cfg.seed = seed;
    cfg.out_dir = dir / "out";
    const auto t_run = std::chrono::steady_clock::now();
    const double acc = run_supervised(cfg, m).trials[0].accuracy;
    pipeline_secs += seconds_since(t_run);

    cfg.mode = RunMode::ablation_individual;
    cfg.individual_all_layers = true;
    double best_single = 0.0;
    for (const auto& a : run_ablation(cfg, m).ablation) best_single = std::max(best_single, a.accuracy);

    ok = ok && acc >= 0.90 && acc >= best_single - 0.02;
    rows += fmt("%s%.3f/%.3f", rows.empty() ? "" : " ", acc, best_single);
  }
  const double total = seconds_since(t0);
  ok = ok && pipeline_secs < 120.0;
  return {ok, fmt("accuracy/best-single per seed: %s (need >= 0.90 and >= best - 0.02); "
                  "pipeline %.1f s (< 120 s), with single-layer fits %.1f s",
                  rows.c_str(), pipeline_secs, total)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  synth::SynthOptions o;
  o.n_train = 400;
  o.n_test = 200;
  o.layers = {{32, 1.0}, {48, 2.0}, {40, 0.5}};
  o.seed = 77;
  const fs::path dir = scratch_dir() / "det";
  const Manifest m = load_manifest(synth::write_synthetic(dir, o));
  RunConfig cfg;
  cfg.buckets = 128;
  cfg.portions = {0.25, 1.0};
  cfg.trials = 2;
  cfg.out_dir = dir / "out";
  write_outputs(run_supervised(cfg, m), dir / "a");
  write_outputs(run_supervised(cfg, m), dir / "b");

  auto strip = [](const std::string& text) {
    auto j = nlohmann::json::parse(text);
    j.erase("timing");
    return j.dump();
  };
  const bool json_same = strip(slurp(dir / "a" / "results.json")) ==
                         strip(slurp(dir / "b" / "results.json"));
  int csv_diffs = 0;
  for (const char* f : {"accuracy.csv", "mu.csv", "calibration.csv"}) {
    csv_diffs += slurp(dir / "a" / f) == slurp(dir / "b" / f) ? 0 : 1;
  }
  return {json_same && csv_diffs == 0,
          fmt("results.json %s apart from timing; %d of 3 CSV series differ",
              json_same ? "identical" : "DIFFERS", csv_diffs)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"sketch-unbiasedness", sketch_unbiasedness},
      {"materialized-sketch-equivalence", materialized_equivalence},
      {"nystrom-linear-exactness", nystrom_linear_exactness},
      {"alignment-qp-optimality", qp_optimality},
      {"mu-concentration", mu_concentration},
      {"rbf-nystrom-full-landmarks", rbf_full_landmarks},
      {"ridge-primal-dual", ridge_primal_dual},
      {"transductive-reduction", transductive_reduction},
      {"ece-oracle-and-temperature", ece_and_temperature},
      {"end-to-end-synthetic", end_to_end},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome out;
    try {
      out = check();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    failed += out.pass ? 0 : 1;
    std::printf("%s  %-34s %s\n", out.pass ? "PASS" : "FAIL", name, out.detail.c_str());
    std::fflush(stdout);
  }
  std::error_code ec;
  fs::remove_all(scratch_dir(), ec);
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
