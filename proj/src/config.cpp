#include "sketchfer/config.hpp"

#include "sketchfer/calibration.hpp"
#include "sketchfer/error.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace sketchfer {

namespace {

using nlohmann::json;

constexpr std::pair<RunMode, std::string_view> kModes[] = {
    {RunMode::supervised, "supervised"},
    {RunMode::semi, "semi"},
    {RunMode::ablation_accumulate, "ablation-accumulate"},
    {RunMode::ablation_individual, "ablation-individual"},
    {RunMode::baseline_randproj, "baseline-randproj"},
    {RunMode::baseline_rbf_bank, "baseline-rbf-bank"},
};

template <typename T>
void read_key(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, std::string(key) + ": " + e.what());
  }
}

}  // namespace

std::string_view mode_name(RunMode mode) {
  for (const auto& [m, name] : kModes) {
    if (m == mode) return name;
  }
  return "?";
}

RunMode parse_mode(std::string_view name) {
  for (const auto& [m, n] : kModes) {
    if (n == name) return m;
  }
  throw Error(Errc::invalid_config, "unknown mode '" + std::string(name) + "'");
}

std::vector<double> log_spaced_portions(double lo, double hi, int points) {
  if (points < 1 || !(lo > 0.0) || !(hi >= lo)) {
    throw Error(Errc::invalid_config, "bad portion sweep");
  }
  if (points == 1) return {hi};
  std::vector<double> out(static_cast<std::size_t>(points));
  const double step = std::log(hi / lo) / (points - 1);
  for (int k = 0; k < points; ++k) out[k] = lo * std::exp(step * k);
  out.back() = hi;
  return out;
}

Index RunConfig::rbf_buckets() const {
  return static_cast<Index>(std::llround(ms_factor * static_cast<double>(buckets)));
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::invalid_config, what); };
  if (buckets < 1 || stacks < 1 || buckets < stacks || buckets % stacks != 0) {
    fail("buckets must be a positive multiple of stacks");
  }
  if (!(ms_factor > 0.0)) fail("ms_factor must be positive");
  if (!skip_rbf) {
    const Index ms = rbf_buckets();
    if (rbf_stacks < 1 || ms < rbf_stacks || ms % rbf_stacks != 0) {
      fail("M_s = ms_factor * buckets must be a positive multiple of rbf_stacks");
    }
  }
  if (!(eig_tol > 0.0 && eig_tol < 1.0)) fail("eig_tol must lie in (0, 1)");
  if (alpha_grid.empty()) fail("alpha_grid is empty");
  for (double a : alpha_grid) {
    if (!(a > 0.0)) fail("alpha_grid values must be positive");
  }
  if (beta_grid.empty() || beta_prime_grid.empty()) fail("beta grids must be nonempty");
  for (double b : beta_grid) {
    if (b < 0.0) fail("beta values must be nonnegative");
  }
  for (double b : beta_prime_grid) {
    if (b < 0.0) fail("beta' values must be nonnegative");
  }
  if (cv_folds < 2) fail("cv_folds must be >= 2");
  if (portions.empty()) fail("portions is empty");
  for (double p : portions) {
    if (!(p > 0.0 && p <= 1.0)) fail("portions must lie in (0, 1]");
  }
  for (int k : labels_per_class) {
    if (k < 1) fail("labels_per_class values must be positive");
  }
  if (trials < 1) fail("trials must be >= 1");
  if (n_bins < 1) fail("n_bins must be >= 1");
  for (double t : temperature_grid) {
    if (!(t > 0.0)) fail("temperature_grid values must be positive");
  }
  if (bank_p_lo > bank_p_hi) fail("bank exponent range is empty");
  if (block_rows < 1) fail("block_rows must be positive");
}

RunConfig config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw Error(Errc::invalid_config, "config must be a JSON object");
  static const std::set<std::string> known = {
      "mode", "manifest", "out_dir", "buckets", "stacks", "ms_factor", "rbf_stacks",
      "skip_rbf", "eig_tol", "alpha_grid", "beta_grid", "beta_prime_grid", "cv_folds",
      "portions", "portion", "labels_per_class", "seed", "trials", "n_bins",
      "temperature_grid", "bandwidth_max_pairs", "bank_p_range", "individual_all_layers",
      "block_rows", "threads"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(Errc::invalid_config, "unknown key '" + key + "'");
  }
  if (j.contains("mode")) {
    std::string mode;
    read_key(j, "mode", mode);
    c.mode = parse_mode(mode);
  }
  std::string path;
  if (j.contains("manifest")) {
    read_key(j, "manifest", path);
    c.manifest = path;
  }
  if (j.contains("out_dir")) {
    read_key(j, "out_dir", path);
    c.out_dir = path;
  }
  read_key(j, "buckets", c.buckets);
  read_key(j, "stacks", c.stacks);
  read_key(j, "ms_factor", c.ms_factor);
  read_key(j, "rbf_stacks", c.rbf_stacks);
  read_key(j, "skip_rbf", c.skip_rbf);
  read_key(j, "eig_tol", c.eig_tol);
  read_key(j, "alpha_grid", c.alpha_grid);
  read_key(j, "beta_grid", c.beta_grid);
  read_key(j, "beta_prime_grid", c.beta_prime_grid);
  read_key(j, "cv_folds", c.cv_folds);
  read_key(j, "portions", c.portions);
  if (j.contains("portion")) {
    double p = 1.0;
    read_key(j, "portion", p);
    c.portions = {p};
  }
  read_key(j, "labels_per_class", c.labels_per_class);
  read_key(j, "seed", c.seed);
  read_key(j, "trials", c.trials);
  read_key(j, "n_bins", c.n_bins);
  read_key(j, "temperature_grid", c.temperature_grid);
  read_key(j, "bandwidth_max_pairs", c.bandwidth_max_pairs);
  if (j.contains("bank_p_range")) {
    std::vector<int> range;
    read_key(j, "bank_p_range", range);
    if (range.size() != 2) throw Error(Errc::invalid_config, "bank_p_range needs [lo, hi]");
    c.bank_p_lo = range[0];
    c.bank_p_hi = range[1];
  }
  read_key(j, "individual_all_layers", c.individual_all_layers);
  read_key(j, "block_rows", c.block_rows);
  read_key(j, "threads", c.threads);
  return c;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, "config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, path.string() + ": " + e.what());
  }
  RunConfig c = config_from_json(j, std::move(base));
  // Relative manifest paths in a config file are relative to that file.
  if (!c.manifest.empty() && c.manifest.is_relative() && j.contains("manifest")) {
    c.manifest = path.parent_path() / c.manifest;
  }
  return c;
}

json to_json(const RunConfig& c) {
  return {{"mode", mode_name(c.mode)},
          {"manifest", c.manifest.string()},
          {"out_dir", c.out_dir.string()},
          {"buckets", c.buckets},
          {"stacks", c.stacks},
          {"ms_factor", c.ms_factor},
          {"rbf_stacks", c.rbf_stacks},
          {"skip_rbf", c.skip_rbf},
          {"eig_tol", c.eig_tol},
          {"alpha_grid", c.alpha_grid},
          {"beta_grid", c.beta_grid},
          {"beta_prime_grid", c.beta_prime_grid},
          {"cv_folds", c.cv_folds},
          {"portions", c.portions},
          {"labels_per_class", c.labels_per_class},
          {"seed", c.seed},
          {"trials", c.trials},
          {"n_bins", c.n_bins},
          {"temperature_grid",
           c.temperature_grid.empty() ? default_temperature_grid() : c.temperature_grid},
          {"bandwidth_max_pairs", c.bandwidth_max_pairs},
          {"bank_p_range", {c.bank_p_lo, c.bank_p_hi}},
          {"individual_all_layers", c.individual_all_layers},
          {"block_rows", c.block_rows}};
}

}  // namespace sketchfer
