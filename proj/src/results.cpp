#include "sketchfer/results.hpp"

#include "sketchfer/error.hpp"
#include "sketchfer/npy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace sketchfer {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Stats {
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
};

Stats summarize(std::vector<double> v) {
  Stats s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  s.median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return s;
}

json trial_json(const TrialRecord& t) {
  return {{"method", t.method},
          {"portion", t.portion},
          {"seed", t.seed},
          {"accuracy", t.accuracy},
          {"alpha", t.alpha},
          {"sigma_sq", t.sigma_sq},
          {"r_squared", t.r_squared},
          {"alignment", t.alignment},
          {"mu", t.mu},
          {"support", t.support_ids},
          {"calibration",
           {{"temperature", t.calibration.temperature},
            {"ece_train_before", t.calibration.ece_train_before},
            {"ece_train_after", t.calibration.ece_train_after},
            {"ece_test_before", t.calibration.ece_test_before},
            {"ece_test_after", t.calibration.ece_test_after}}}};
}

// Mean/std/median of accuracy per (method, portion), in first-seen order.
json aggregates(const std::vector<TrialRecord>& trials) {
  std::vector<std::pair<std::string, double>> keys;
  for (const auto& t : trials) {
    const std::pair<std::string, double> k{t.method, t.portion};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  json out = json::array();
  for (const auto& [method, portion] : keys) {
    std::vector<double> acc;
    for (const auto& t : trials) {
      if (t.method == method && t.portion == portion) acc.push_back(t.accuracy);
    }
    const Stats s = summarize(acc);
    out.push_back({{"method", method},
                   {"portion", portion},
                   {"trials", acc.size()},
                   {"mean", s.mean},
                   {"std", s.std},
                   {"median", s.median}});
  }
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(ids[i]);
  }
  return s;
}

std::ofstream open_csv(const fs::path& path, const char* header) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << header << '\n';
  return out;
}

}  // namespace

json to_json(const RunResult& r) {
  json trials = json::array();
  for (const auto& t : r.trials) trials.push_back(trial_json(t));

  json ablation = json::array();
  for (const auto& a : r.ablation) {
    ablation.push_back({{"kind", a.kind},
                        {"seed", a.seed},
                        {"step", a.step},
                        {"layers", a.layer_ids},
                        {"accuracy", a.accuracy}});
  }
  json semi = json::array();
  for (const auto& s : r.semi) {
    semi.push_back({{"labels_per_class", s.labels_per_class},
                    {"seed", s.seed},
                    {"semi_accuracy", s.semi_accuracy},
                    {"supervised_accuracy", s.supervised_accuracy},
                    {"relative_improvement", s.relative_improvement},
                    {"alpha", s.alpha},
                    {"beta", s.beta},
                    {"beta_prime", s.beta_prime},
                    {"pseudo_label_accuracy", s.pseudo_label_accuracy}});
  }

  json j = {{"mode", r.mode},
            {"dataset", r.dataset},
            {"config", to_json(r.config)},
            {"rbf_buckets", r.config.rbf_buckets()},
            {"layer_ids", r.layer_ids},
            {"conventions",
             {{"rbf_bandwidth", "k(x,y) = exp(-||x-y||^2 / (2 sigma^2)); bank uses 2 sigma^2 = 2^p gamma"},
              {"confidence_map", "softmax(scores / t)"},
              {"ece_bins", "equal width on (0,1], right-closed"},
              {"alignment", "uncentered"}}},
            {"trials", trials},
            {"aggregates", aggregates(r.trials)},
            {"ablation", ablation},
            {"semi", semi}};
  if (r.export_data) {
    const auto& e = *r.export_data;
    j["export"] = {{"seed", e.seed},
                   {"rows", e.train_scores.rows()},
                   {"cols", e.train_scores.cols()},
                   {"alpha", e.alpha},
                   {"sigma_sq", e.sigma_sq},
                   {"temperature", e.temperature},
                   {"mu", e.mu},
                   {"layer_ids", e.layer_ids}};
  }
  j["timing"] = r.timing;
  return j;
}

void write_outputs(const RunResult& r, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "results.json");
    if (!out) throw Error(Errc::io, "cannot write results.json");
    out << to_json(r).dump(2) << '\n';
  }
  {
    auto out = open_csv(out_dir / "accuracy.csv", "method,portion,seed,accuracy,alpha,sigma_sq");
    for (const auto& t : r.trials) {
      out << t.method << ',' << fmt(t.portion) << ',' << t.seed << ',' << fmt(t.accuracy) << ','
          << fmt(t.alpha) << ',' << fmt(t.sigma_sq) << '\n';
    }
  }
  {
    auto out = open_csv(out_dir / "mu.csv", "method,portion,seed,index,layer_id,mu");
    for (const auto& t : r.trials) {
      for (std::size_t l = 0; l < t.mu.size(); ++l) {
        const int id = t.method == "rbf-bank" || l >= r.layer_ids.size()
                           ? static_cast<int>(l)
                           : r.layer_ids[l];
        out << t.method << ',' << fmt(t.portion) << ',' << t.seed << ',' << l << ',' << id << ','
            << fmt(t.mu[l]) << '\n';
      }
    }
  }
  {
    auto out = open_csv(out_dir / "ablation.csv", "kind,seed,step,layers,accuracy");
    for (const auto& a : r.ablation) {
      out << a.kind << ',' << a.seed << ',' << a.step << ',' << join_ids(a.layer_ids) << ','
          << fmt(a.accuracy) << '\n';
    }
  }
  {
    auto out = open_csv(out_dir / "semi.csv",
                        "labels_per_class,seed,semi_accuracy,supervised_accuracy,"
                        "relative_improvement,alpha,beta,beta_prime");
    for (const auto& s : r.semi) {
      out << s.labels_per_class << ',' << s.seed << ',' << fmt(s.semi_accuracy) << ','
          << fmt(s.supervised_accuracy) << ',' << fmt(s.relative_improvement) << ','
          << fmt(s.alpha) << ',' << fmt(s.beta) << ',' << fmt(s.beta_prime) << '\n';
    }
  }
  {
    auto out = open_csv(out_dir / "calibration.csv",
                        "method,portion,seed,temperature,ece_train_before,ece_train_after,"
                        "ece_test_before,ece_test_after");
    for (const auto& t : r.trials) {
      const auto& c = t.calibration;
      out << t.method << ',' << fmt(t.portion) << ',' << t.seed << ',' << fmt(c.temperature)
          << ',' << fmt(c.ece_train_before) << ',' << fmt(c.ece_train_after) << ','
          << fmt(c.ece_test_before) << ',' << fmt(c.ece_test_after) << '\n';
    }
  }
  {
    auto out = open_csv(out_dir / "timing.csv", "stage,seconds");
    for (const auto& [stage, secs] : r.timing) out << stage << ',' << fmt(secs) << '\n';
  }
}

void export_predictions(const RunResult& r, const fs::path& out_dir) {
  if (!r.export_data) {
    throw Error(Errc::io, "run kept no training-set predictions (needs a portion-1.0 trial)");
  }
  fs::create_directories(out_dir);
  const auto& e = *r.export_data;
  npy::save_matrix(out_dir / "predictions.npy", e.train_scores);
  const json meta = {{"file", "predictions.npy"},
                     {"dtype", "float64"},
                     {"shape", {e.train_scores.rows(), e.train_scores.cols()}},
                     {"dataset", r.dataset},
                     {"seed", e.seed},
                     {"alpha", e.alpha},
                     {"sigma_sq", e.sigma_sq},
                     {"temperature", e.temperature},
                     {"mu", e.mu},
                     {"layer_ids", e.layer_ids}};
  std::ofstream out(out_dir / "predictions.json");
  if (!out) throw Error(Errc::io, "cannot write predictions.json");
  out << meta.dump(2) << '\n';
}

}  // namespace sketchfer
