#include "sketchfer/pipeline.hpp"

#include "sketchfer/alignment.hpp"
#include "sketchfer/calibration.hpp"
#include "sketchfer/error.hpp"
#include "sketchfer/kernels.hpp"
#include "sketchfer/lowrank.hpp"
#include "sketchfer/random.hpp"
#include "sketchfer/regression.hpp"
#include "sketchfer/row_source.hpp"
#include "sketchfer/sketch.hpp"

#include <spdlog/spdlog.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

namespace sketchfer {

namespace {

// Stream tags for derive_seed. Layer sketches use kLayerSketch + layer index.
constexpr std::uint64_t kSubsample = 1;
constexpr std::uint64_t kRbfSketch = 2;
constexpr std::uint64_t kAlphaFolds = 3;
constexpr std::uint64_t kBetaFolds = 4;
constexpr std::uint64_t kLabeled = 5;
constexpr std::uint64_t kBandwidth = 6;
constexpr std::uint64_t kLayerSketch = 0x1000;

using Timing = std::map<std::string, double>;

template <typename Fn>
decltype(auto) timed(Timing& timing, const std::string& stage, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  struct Charge {
    Timing& t;
    const std::string& s;
    std::chrono::steady_clock::time_point start;
    ~Charge() {
      t[s] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  } charge{timing, stage, start};
  return with_stage(stage, std::forward<Fn>(fn));
}

int worker_count(const RunConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

// Runs fn(0..n-1) on up to `threads` workers. Rethrows the failure with the
// lowest index so errors do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(threads));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::filesystem::path cache_file(const RunConfig& cfg, int layer_id) {
  static std::atomic<std::uint64_t> counter{0};
  const auto dir = cache_directory(cfg.out_dir / "cache");
  return dir / ("sketchfer_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) +
                "_layer" + std::to_string(layer_id) + ".npy");
}

RowMatrix select_rows(const RowMatrix& m, std::span<const Index> rows) {
  RowMatrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

std::vector<int> select_labels(std::span<const int> labels, std::span<const Index> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
  return out;
}

std::vector<Index> all_rows(Index n) {
  std::vector<Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Index{0});
  return rows;
}

std::unique_ptr<NpyRowSource> open_rows(const std::filesystem::path& path,
                                        const std::vector<Index>& rows, Index file_rows,
                                        Index block_rows) {
  if (static_cast<Index>(rows.size()) == file_rows) {
    return std::make_unique<NpyRowSource>(path, block_rows);
  }
  return std::make_unique<NpyRowSource>(path, rows, block_rows);
}

std::vector<int> layer_ids(const Manifest& m) {
  std::vector<int> ids;
  for (const auto& l : m.layers) ids.push_back(l.id);
  return ids;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// Train/test features of every layer for one trial.
struct LayerSet {
  std::vector<RowMatrix> train;
  std::vector<RowMatrix> test;

  std::vector<const RowMatrix*> train_ptrs() const { return ptrs(train); }
  std::vector<const RowMatrix*> test_ptrs() const { return ptrs(test); }

 private:
  static std::vector<const RowMatrix*> ptrs(const std::vector<RowMatrix>& v) {
    std::vector<const RowMatrix*> out;
    for (const auto& m : v) out.push_back(&m);
    return out;
  }
};

LayerSet nystrom_layers(const RunConfig& cfg, const Manifest& m, const std::vector<Index>& rows,
                        std::uint64_t seed) {
  LayerSet out;
  const std::size_t n = m.layers.size();
  out.train.resize(n);
  out.test.resize(n);
  parallel_for(n, worker_count(cfg), [&](std::size_t l) {
    const LayerEntry& layer = m.layers[l];
    with_stage("layer " + std::to_string(layer.id), [&] {
      auto source = open_rows(layer.train, rows, m.n_train, cfg.block_rows);
      CachedBlockSource cached(*source, cache_file(cfg, layer.id), cfg.block_rows);
      const SketchSpec spec = make_sketch(derive_seed(seed, kLayerSketch + l),
                                          static_cast<Index>(rows.size()), cfg.buckets,
                                          cfg.stacks);
      LowRankFeatures f = nystrom_linear_features(cached, spec, cfg.eig_tol, layer.id);
      out.test[l] = project_rows(f, NpyRowSource(layer.test, cfg.block_rows));
      out.train[l] = std::move(f.data);
      return 0;
    });
  });
  return out;
}

// Feature hashing of one streamed layer.
RowMatrix hash_rows(const SketchSpec& spec, const RowBlockSource& source) {
  RowMatrix out(source.rows(), spec.n_buckets());
  Index at = 0;
  source.for_each_block([&](const RowBlock& block) {
    out.middleRows(at, block.rows()) = sketch_features(spec, block);
    at += block.rows();
  });
  return out;
}

LayerSet randproj_layers(const RunConfig& cfg, const Manifest& m, const std::vector<Index>& rows,
                         std::uint64_t seed) {
  LayerSet out;
  const std::size_t n = m.layers.size();
  out.train.resize(n);
  out.test.resize(n);
  parallel_for(n, worker_count(cfg), [&](std::size_t l) {
    const LayerEntry& layer = m.layers[l];
    with_stage("layer " + std::to_string(layer.id), [&] {
      const SketchSpec spec = make_sketch(derive_seed(seed, kLayerSketch + l), layer.dim,
                                          cfg.buckets, cfg.stacks);
      auto source = open_rows(layer.train, rows, m.n_train, cfg.block_rows);
      out.train[l] = hash_rows(spec, *source);
      out.test[l] = hash_rows(spec, NpyRowSource(layer.test, cfg.block_rows));
      return 0;
    });
  });
  return out;
}

int fold_count(const RunConfig& cfg, Index rows) {
  return static_cast<int>(std::min<Index>(cfg.cv_folds, rows));
}

struct Downstream {
  double accuracy = 0.0;
  double alpha = 0.0;
  double sigma_sq = 0.0;
  RowMatrix train_scores;
  CalibrationSummary calibration;
};

// Optional RBF Nystrom on the combined features, then alpha CV, ridge fit,
// test accuracy and temperature scaling fit on the training scores.
Downstream fit_evaluate(const RunConfig& cfg, const RowMatrix& x, const LabelMatrix& y,
                        const RowMatrix& x_test, std::span<const int> test_labels,
                        std::uint64_t seed, bool rbf, Timing& timing) {
  Downstream out;
  RowMatrix z;
  RowMatrix z_test;
  if (rbf) {
    timed(timing, "rbf", [&] {
      out.sigma_sq = rbf_sigma_heuristic(x);
      const SketchSpec spec =
          make_sketch(derive_seed(seed, kRbfSketch), x.rows(), cfg.rbf_buckets(), cfg.rbf_stacks);
      const RbfFeatureMap map = fit_rbf_nystrom(x, spec, out.sigma_sq, cfg.eig_tol);
      z = transform(map, x);
      z_test = transform(map, x_test);
      return 0;
    });
  }
  const RowMatrix& zx = rbf ? z : x;
  const RowMatrix& zt = rbf ? z_test : x_test;

  out.alpha = timed(timing, "cv", [&] {
    return cross_validate_alpha(zx, y, fold_count(cfg, zx.rows()), cfg.alpha_grid,
                                derive_seed(seed, kAlphaFolds))
        .alpha;
  });
  const auto [train_pred, test_pred] = timed(timing, "fit", [&] {
    const RidgeModel model = fit_ridge(zx, y, out.alpha);
    return std::pair{predict(model, zx), predict(model, zt)};
  });
  out.accuracy = accuracy(test_pred.labels, test_labels);

  timed(timing, "calibration", [&] {
    const auto grid =
        cfg.temperature_grid.empty() ? default_temperature_grid() : cfg.temperature_grid;
    const TemperatureFit fit = fit_temperature(train_pred, y.labels(), grid, cfg.n_bins);
    auto& c = out.calibration;
    c.temperature = fit.t;
    c.ece_train_before = fit.baseline_ece;
    c.ece_train_after = fit.ece;
    c.ece_test_before = ece(scores_to_confidence(test_pred, 1.0), test_labels, cfg.n_bins).ece;
    c.ece_test_after = ece(scores_to_confidence(test_pred, fit.t), test_labels, cfg.n_bins).ece;
    return 0;
  });
  out.train_scores = train_pred.scores;
  return out;
}

TrialRecord make_record(std::string method, double portion, std::uint64_t seed,
                        const Downstream& d) {
  TrialRecord r;
  r.method = std::move(method);
  r.portion = portion;
  r.seed = seed;
  r.accuracy = d.accuracy;
  r.alpha = d.alpha;
  r.sigma_sq = d.sigma_sq;
  r.calibration = d.calibration;
  return r;
}

// Alignment weights, combined features and downstream fit over a layer set.
struct LayeredFit {
  AlignmentWeights weights;
  RowMatrix combined;
  RowMatrix combined_test;
  Downstream downstream;
  double r_squared = 0.0;
};

LayeredFit fit_layers(const RunConfig& cfg, const LayerSet& layers, const LabelMatrix& y,
                      std::span<const int> test_labels, std::uint64_t seed, bool rbf,
                      Timing& timing) {
  LayeredFit out;
  timed(timing, "alignment", [&] {
    out.weights = solve_nn_quadratic(build_gram_stats(layers.train_ptrs(), y));
    out.combined = concat_weighted(layers.train_ptrs(), out.weights);
    out.combined_test = concat_weighted(layers.test_ptrs(), out.weights);
    out.r_squared = r_squared_diagnostic(out.combined, y);
    return 0;
  });
  out.downstream =
      fit_evaluate(cfg, out.combined, y, out.combined_test, test_labels, seed, rbf, timing);
  return out;
}

void fill_weights(TrialRecord& r, const LayeredFit& fit, const std::vector<int>& ids) {
  r.mu = to_std(fit.weights.mu);
  r.alignment = fit.weights.objective;
  r.r_squared = fit.r_squared;
  for (Index s : fit.weights.support) r.support_ids.push_back(ids[static_cast<std::size_t>(s)]);
}

RunResult start_result(const RunConfig& cfg, const Manifest& m) {
  cfg.validate();
  RunResult r;
  r.mode = std::string(mode_name(cfg.mode));
  r.config = cfg;
  r.dataset = m.dataset;
  r.layer_ids = layer_ids(m);
  return r;
}

void require_mode(const RunConfig& cfg, std::initializer_list<RunMode> allowed, const char* op) {
  if (std::find(allowed.begin(), allowed.end(), cfg.mode) == allowed.end()) {
    throw Error(Errc::invalid_config,
                std::string(op) + " cannot run mode " + std::string(mode_name(cfg.mode)));
  }
}

// Weights restricted to `keep` (layer order), with the given values.
AlignmentWeights restrict_weights(const AlignmentWeights& w, std::vector<Index> keep,
                                  bool unit) {
  AlignmentWeights out = w;
  out.mu = Vector::Zero(w.mu.size());
  std::sort(keep.begin(), keep.end());
  for (Index l : keep) out.mu(l) = unit ? 1.0 : w.mu(l);
  out.support = std::move(keep);
  return out;
}

}  // namespace

std::uint64_t trial_seed(const RunConfig& config, int trial) {
  return config.seed + static_cast<std::uint64_t>(trial);
}

std::vector<Index> stratified_subsample(std::span<const int> labels, int n_classes,
                                        double portion, std::uint64_t seed) {
  if (!(portion > 0.0 && portion <= 1.0)) {
    throw Error(Errc::invalid_argument, "portion must lie in (0, 1]");
  }
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      throw Error(Errc::label_out_of_range, "label " + std::to_string(labels[i]));
    }
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  }
  if (portion == 1.0) return all_rows(static_cast<Index>(labels.size()));
  SeededRng rng(seed);
  std::vector<Index> out;
  for (auto& members : by_class) {
    if (members.empty()) continue;
    rng.shuffle(std::span<Index>(members));
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(portion * static_cast<double>(members.size()))));
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Index> labeled_subset(std::span<const int> labels, int n_classes, int per_class,
                                  std::uint64_t seed) {
  if (per_class < 1) throw Error(Errc::invalid_argument, "labels_per_class must be positive");
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      throw Error(Errc::label_out_of_range, "label " + std::to_string(labels[i]));
    }
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  }
  SeededRng rng(seed);
  std::vector<Index> out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < static_cast<std::size_t>(per_class)) {
      throw Error(Errc::class_exhausted, "class " + std::to_string(c) + " has " +
                                             std::to_string(members.size()) + " rows, " +
                                             std::to_string(per_class) + " requested");
    }
    rng.shuffle(std::span<Index>(members));
    out.insert(out.end(), members.begin(), members.begin() + per_class);
  }
  std::sort(out.begin(), out.end());
  return out;
}

RunResult run(const RunConfig& config, const Manifest& manifest) {
  switch (config.mode) {
    case RunMode::supervised:
      return run_supervised(config, manifest);
    case RunMode::semi:
      return run_semi(config, manifest);
    case RunMode::ablation_accumulate:
    case RunMode::ablation_individual:
      return run_ablation(config, manifest);
    case RunMode::baseline_randproj:
    case RunMode::baseline_rbf_bank:
      return run_baselines(config, manifest);
  }
  throw Error(Errc::invalid_config, "unknown mode");
}

RunResult run_supervised(const RunConfig& cfg, const Manifest& m) {
  require_mode(cfg, {RunMode::supervised}, "run_supervised");
  RunResult result = start_result(cfg, m);
  for (double portion : cfg.portions) {
    for (int t = 0; t < cfg.trials; ++t) {
      const std::uint64_t seed = trial_seed(cfg, t);
      const auto rows = stratified_subsample(m.train_labels, m.n_classes, portion,
                                             derive_seed(seed, kSubsample));
      const LabelMatrix y =
          LabelMatrix::from_labels(select_labels(m.train_labels, rows), m.n_classes);
      const LayerSet layers = timed(result.timing, "lowrank",
                                    [&] { return nystrom_layers(cfg, m, rows, seed); });
      const LayeredFit fit =
          fit_layers(cfg, layers, y, m.test_labels, seed, !cfg.skip_rbf, result.timing);

      TrialRecord rec = make_record("nystrom", portion, seed, fit.downstream);
      fill_weights(rec, fit, result.layer_ids);
      spdlog::info("portion {:.4g} seed {}: accuracy {:.4f} (alpha {:g}, {} of {} layers)",
                   portion, seed, rec.accuracy, rec.alpha, rec.support_ids.size(),
                   m.layers.size());
      if (portion == 1.0 && !result.export_data) {
        result.export_data = PredictionExport{fit.downstream.train_scores,
                                              seed,
                                              rec.alpha,
                                              rec.sigma_sq,
                                              rec.calibration.temperature,
                                              rec.mu,
                                              result.layer_ids};
      }
      result.trials.push_back(std::move(rec));
    }
  }
  return result;
}

RunResult run_ablation(const RunConfig& cfg, const Manifest& m) {
  require_mode(cfg, {RunMode::ablation_accumulate, RunMode::ablation_individual},
               "run_ablation");
  RunResult result = start_result(cfg, m);
  const bool accumulate = cfg.mode == RunMode::ablation_accumulate;
  const auto rows = all_rows(m.n_train);
  const LabelMatrix y = LabelMatrix::from_labels(m.train_labels, m.n_classes);

  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = trial_seed(cfg, t);
    const LayerSet layers =
        timed(result.timing, "lowrank", [&] { return nystrom_layers(cfg, m, rows, seed); });
    const LayeredFit full =
        fit_layers(cfg, layers, y, m.test_labels, seed, !cfg.skip_rbf, result.timing);
    TrialRecord rec = make_record("nystrom", 1.0, seed, full.downstream);
    fill_weights(rec, full, result.layer_ids);
    result.trials.push_back(std::move(rec));

    // Support sorted by decreasing mu; equal weights keep layer order.
    std::vector<Index> order = full.weights.support;
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return full.weights.mu(a) > full.weights.mu(b); });
    if (!accumulate && cfg.individual_all_layers) {
      std::vector<Index> rest;
      for (Index l = 0; l < static_cast<Index>(m.layers.size()); ++l) {
        if (std::find(order.begin(), order.end(), l) == order.end()) rest.push_back(l);
      }
      order.insert(order.end(), rest.begin(), rest.end());
    }

    for (std::size_t k = 0; k < order.size(); ++k) {
      std::vector<Index> keep;
      if (accumulate) {
        keep.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k + 1));
      } else {
        keep = {order[k]};
      }
      const AlignmentWeights w = restrict_weights(full.weights, keep, !accumulate);
      const auto [x, x_test] = timed(result.timing, "alignment", [&] {
        return std::pair{concat_weighted(layers.train_ptrs(), w),
                         concat_weighted(layers.test_ptrs(), w)};
      });
      const Downstream d =
          fit_evaluate(cfg, x, y, x_test, m.test_labels, seed, !cfg.skip_rbf, result.timing);

      AblationRecord ab;
      ab.kind = accumulate ? "accumulate" : "individual";
      ab.seed = seed;
      ab.step = static_cast<int>(k + 1);
      for (Index l : keep) ab.layer_ids.push_back(result.layer_ids[static_cast<std::size_t>(l)]);
      ab.accuracy = d.accuracy;
      spdlog::info("{} seed {} step {}: accuracy {:.4f}", ab.kind, seed, ab.step, ab.accuracy);
      result.ablation.push_back(std::move(ab));
    }
  }
  return result;
}

RunResult run_semi(const RunConfig& cfg, const Manifest& m) {
  require_mode(cfg, {RunMode::semi}, "run_semi");
  RunResult result = start_result(cfg, m);
  const auto rows = all_rows(m.n_train);

  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = trial_seed(cfg, t);
    // Features are label-free, so one set serves every labeled budget.
    const LayerSet layers =
        timed(result.timing, "lowrank", [&] { return nystrom_layers(cfg, m, rows, seed); });

    for (int per_class : cfg.labels_per_class) {
      const std::uint64_t budget_seed = derive_seed(seed, static_cast<std::uint64_t>(per_class));
      const auto labeled = with_stage("labels", [&] {
        return labeled_subset(m.train_labels, m.n_classes, per_class,
                              derive_seed(budget_seed, kLabeled));
      });
      std::vector<Index> unlabeled;
      std::set_difference(rows.begin(), rows.end(), labeled.begin(), labeled.end(),
                          std::back_inserter(unlabeled));
      const std::vector<int> lab_truth = select_labels(m.train_labels, labeled);
      const LabelMatrix y = LabelMatrix::from_labels(lab_truth, m.n_classes);
      if (labeled.size() < 2) {
        throw Error(Errc::invalid_config, "semi mode needs at least two labeled rows");
      }

      const auto [weights, combined, combined_test] = timed(result.timing, "alignment", [&] {
        std::vector<RowMatrix> sub;
        for (const auto& f : layers.train) sub.push_back(select_rows(f, labeled));
        std::vector<const RowMatrix*> ptrs;
        for (const auto& s : sub) ptrs.push_back(&s);
        AlignmentWeights w = solve_nn_quadratic(build_gram_stats(ptrs, y));
        RowMatrix x = concat_weighted(layers.train_ptrs(), w);
        RowMatrix xt = concat_weighted(layers.test_ptrs(), w);
        return std::tuple{std::move(w), std::move(x), std::move(xt)};
      });

      RowMatrix z = combined;
      RowMatrix z_test = combined_test;
      if (!cfg.skip_rbf) {
        timed(result.timing, "rbf", [&] {
          const double sigma_sq = rbf_sigma_heuristic(combined);
          const SketchSpec spec = make_sketch(derive_seed(budget_seed, kRbfSketch),
                                              combined.rows(), cfg.rbf_buckets(),
                                              cfg.rbf_stacks);
          const RbfFeatureMap map = fit_rbf_nystrom(combined, spec, sigma_sq, cfg.eig_tol);
          z = transform(map, combined);
          z_test = transform(map, combined_test);
          return 0;
        });
      }
      const RowMatrix z_lab = select_rows(z, labeled);
      const RowMatrix z_unl = select_rows(z, unlabeled);
      const int folds = fold_count(cfg, z_lab.rows());

      SemiRecord rec;
      rec.labels_per_class = per_class;
      rec.seed = seed;
      rec.alpha = timed(result.timing, "cv", [&] {
        return cross_validate_alpha(z_lab, y, folds, cfg.alpha_grid,
                                    derive_seed(budget_seed, kAlphaFolds))
            .alpha;
      });
      rec.supervised_accuracy = timed(result.timing, "fit", [&] {
        return accuracy(predict(fit_ridge(z_lab, y, rec.alpha), z_test).labels, m.test_labels);
      });

      std::vector<double> bp_grid = cfg.beta_prime_grid;
      if (unlabeled.empty()) bp_grid = {0.0};
      const BetaSelection betas = timed(result.timing, "cv", [&] {
        return cross_validate_betas(z_lab, y, z_unl, folds, cfg.beta_grid, bp_grid, rec.alpha,
                                    derive_seed(budget_seed, kBetaFolds));
      });
      rec.beta = betas.beta;
      rec.beta_prime = betas.beta_prime;
      const TransductiveFit fit = timed(result.timing, "fit", [&] {
        return fit_transductive(z_lab, y, z_unl, rec.beta, rec.beta_prime, rec.alpha);
      });
      rec.semi_accuracy = accuracy(predict(fit.model, z_test).labels, m.test_labels);
      rec.relative_improvement = (rec.semi_accuracy - rec.supervised_accuracy) /
                                 rec.supervised_accuracy;
      if (!unlabeled.empty()) {
        rec.pseudo_label_accuracy =
            accuracy(fit.pseudo_labels.labels(), select_labels(m.train_labels, unlabeled));
      }
      spdlog::info("semi {} per class seed {}: {:.4f} vs supervised {:.4f} (beta {:g}, beta' {:g})",
                   per_class, seed, rec.semi_accuracy, rec.supervised_accuracy, rec.beta,
                   rec.beta_prime);
      (void)weights;
      result.semi.push_back(rec);
    }
  }
  return result;
}

RunResult run_baselines(const RunConfig& cfg, const Manifest& m) {
  require_mode(cfg, {RunMode::baseline_randproj, RunMode::baseline_rbf_bank}, "run_baselines");
  RunResult result = start_result(cfg, m);
  const bool bank = cfg.mode == RunMode::baseline_rbf_bank;
  if (bank && !m.raw) {
    throw Error(Errc::invalid_manifest, "baseline-rbf-bank needs a \"raw\" entry in the manifest");
  }

  for (double portion : cfg.portions) {
    for (int t = 0; t < cfg.trials; ++t) {
      const std::uint64_t seed = trial_seed(cfg, t);
      const auto rows = stratified_subsample(m.train_labels, m.n_classes, portion,
                                             derive_seed(seed, kSubsample));
      const LabelMatrix y =
          LabelMatrix::from_labels(select_labels(m.train_labels, rows), m.n_classes);

      TrialRecord rec;
      if (!bank) {
        const LayerSet layers = timed(result.timing, "randproj",
                                      [&] { return randproj_layers(cfg, m, rows, seed); });
        const LayeredFit fit =
            fit_layers(cfg, layers, y, m.test_labels, seed, !cfg.skip_rbf, result.timing);
        rec = make_record("randproj", portion, seed, fit.downstream);
        fill_weights(rec, fit, result.layer_ids);
      } else {
        LayerSet kernels;
        timed(result.timing, "rbf_bank", [&] {
          const RowMatrix x = collect_rows(*open_rows(m.raw->train, rows, m.n_train,
                                                      cfg.block_rows));
          const RowMatrix x_test = collect_rows(NpyRowSource(m.raw->test, cfg.block_rows));
          const double gamma =
              median_bandwidth(x, cfg.bandwidth_max_pairs, derive_seed(seed, kBandwidth));
          const SketchSpec spec = make_sketch(derive_seed(seed, kRbfSketch), x.rows(),
                                              cfg.rbf_buckets(), cfg.rbf_stacks);
          for (const auto& map :
               rbf_kernel_bank(x, gamma, cfg.bank_p_lo, cfg.bank_p_hi, spec, cfg.eig_tol)) {
            kernels.train.push_back(transform(map, x));
            kernels.test.push_back(transform(map, x_test));
          }
          return 0;
        });
        // The bank already is the kernel; KRR runs on its weighted features.
        const LayeredFit fit =
            fit_layers(cfg, kernels, y, m.test_labels, seed, false, result.timing);
        rec = make_record("rbf-bank", portion, seed, fit.downstream);
        rec.mu = to_std(fit.weights.mu);
        rec.alignment = fit.weights.objective;
        rec.r_squared = fit.r_squared;
        for (Index s : fit.weights.support) rec.support_ids.push_back(static_cast<int>(s));
      }
      spdlog::info("{} portion {:.4g} seed {}: accuracy {:.4f}", rec.method, portion, seed,
                   rec.accuracy);
      result.trials.push_back(std::move(rec));
    }
  }
  return result;
}

}  // namespace sketchfer
