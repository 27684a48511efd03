#pragma once

#include "sketchfer/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sketchfer {

struct LayerEntry {
  int id = 0;
  Index dim = 0;
  std::filesystem::path train;
  std::filesystem::path test;
};

/// Raw (pre-network) inputs, used only by the RBF-bank baseline.
struct RawInputEntry {
  Index dim = 0;
  std::filesystem::path train;
  std::filesystem::path test;
};

/// Index of per-layer feature files. Relative paths resolve against the
/// manifest's directory. See docs/manifest.md for the schema.
struct Manifest {
  std::filesystem::path source;
  std::string dataset;
  Index n_train = 0;
  Index n_test = 0;
  int n_classes = 0;
  std::string dtype;
  std::vector<LayerEntry> layers;
  std::filesystem::path labels_train;
  std::filesystem::path labels_test;
  std::optional<RawInputEntry> raw;
  nlohmann::json producer;

  std::vector<int> train_labels;
  std::vector<int> test_labels;
};

/// Parses and eagerly validates a manifest: every listed file must exist, have
/// the declared shape and contain only finite values, and labels must lie in
/// [0, n_classes). Layer order is preserved as written.
Manifest load_manifest(const std::filesystem::path& path);

/// Writes a manifest JSON that load_manifest accepts (paths made relative to
/// the manifest's directory when possible).
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

}  // namespace sketchfer
