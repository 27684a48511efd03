#include "sketchfer/manifest.hpp"

#include "sketchfer/error.hpp"
#include "sketchfer/npy.hpp"

#include <algorithm>
#include <fstream>
#include <string>

namespace sketchfer {

namespace {

namespace fs = std::filesystem;

using nlohmann::json;

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(Errc::invalid_manifest, where + " lacks '" + key + "'");
  }
  return j.at(key);
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& where) {
  try {
    return field(j, key, where).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_manifest, where + "." + key + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void check_array(const fs::path& path, Index rows, Index cols, const std::string& what) {
  if (!fs::exists(path)) {
    throw Error(Errc::missing_file, what + ": " + path.string());
  }
  npy::RowReader reader(path);
  if (reader.header().shape.size() != 2 || reader.rows() != rows || reader.cols() != cols) {
    std::string shape;
    for (auto d : reader.header().shape) shape += std::to_string(d) + ",";
    throw Error(Errc::shape_mismatch, what + ": " + path.string() + " has shape (" + shape +
                                          ") but manifest declares (" + std::to_string(rows) +
                                          "," + std::to_string(cols) + ")");
  }
  constexpr Index kBlock = 4096;
  for (Index first = 0; first < rows; first += kBlock) {
    const RowMatrix block = reader.read(first, std::min(kBlock, rows - first));
    if (!block.allFinite()) {
      throw Error(Errc::non_finite_data, what + ": " + path.string() + " has NaN or Inf");
    }
  }
}

std::vector<int> load_labels(const fs::path& path, Index rows, int n_classes,
                             const std::string& what) {
  if (!fs::exists(path)) {
    throw Error(Errc::missing_file, what + ": " + path.string());
  }
  const auto values = npy::load_integers(path);
  if (static_cast<Index>(values.size()) != rows) {
    throw Error(Errc::shape_mismatch, what + ": " + path.string() + " has " +
                                          std::to_string(values.size()) + " labels, expected " +
                                          std::to_string(rows));
  }
  std::vector<int> out;
  out.reserve(values.size());
  for (auto v : values) {
    if (v < 0 || v >= n_classes) {
      throw Error(Errc::label_out_of_range, what + ": label " + std::to_string(v));
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::string relative_or_absolute(const fs::path& p, const fs::path& base) {
  std::error_code ec;
  const auto rel = fs::relative(p, base, ec);
  return ec || rel.empty() ? p.string() : rel.string();
}

}  // namespace

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Errc::missing_file, "manifest " + path.string());
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_manifest, path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  const std::string where = "manifest";

  Manifest m;
  m.source = path;
  m.dataset = j.value("dataset", std::string("unnamed"));
  m.n_train = get_as<Index>(j, "n_train", where);
  m.n_test = get_as<Index>(j, "n_test", where);
  m.n_classes = get_as<int>(j, "n_classes", where);
  m.dtype = j.value("dtype", std::string("float32"));
  m.producer = j.value("producer", json::object());
  if (m.n_train < 1 || m.n_test < 1 || m.n_classes < 1) {
    throw Error(Errc::invalid_manifest, "n_train, n_test and n_classes must be positive");
  }

  const json& layers = field(j, "layers", where);
  if (!layers.is_array() || layers.empty()) {
    throw Error(Errc::invalid_manifest, "manifest lists no layers");
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string lw = "layers[" + std::to_string(k) + "]";
    LayerEntry e;
    e.id = layers[k].value("id", static_cast<int>(k));
    e.dim = get_as<Index>(layers[k], "dim", lw);
    e.train = resolve(base, get_as<std::string>(layers[k], "train", lw));
    e.test = resolve(base, get_as<std::string>(layers[k], "test", lw));
    if (e.dim < 1) throw Error(Errc::invalid_manifest, lw + ".dim must be positive");
    m.layers.push_back(std::move(e));
  }

  const json& labels = field(j, "labels", where);
  m.labels_train = resolve(base, get_as<std::string>(labels, "train", "labels"));
  m.labels_test = resolve(base, get_as<std::string>(labels, "test", "labels"));

  if (j.contains("raw") && !j.at("raw").is_null()) {
    RawInputEntry raw;
    raw.dim = get_as<Index>(j.at("raw"), "dim", "raw");
    raw.train = resolve(base, get_as<std::string>(j.at("raw"), "train", "raw"));
    raw.test = resolve(base, get_as<std::string>(j.at("raw"), "test", "raw"));
    m.raw = raw;
  }

  for (const auto& e : m.layers) {
    const std::string what = "layer " + std::to_string(e.id);
    check_array(e.train, m.n_train, e.dim, what + " train");
    check_array(e.test, m.n_test, e.dim, what + " test");
  }
  if (m.raw) {
    check_array(m.raw->train, m.n_train, m.raw->dim, "raw train");
    check_array(m.raw->test, m.n_test, m.raw->dim, "raw test");
  }
  m.train_labels = load_labels(m.labels_train, m.n_train, m.n_classes, "train labels");
  m.test_labels = load_labels(m.labels_test, m.n_test, m.n_classes, "test labels");
  return m;
}

void save_manifest(const Manifest& m, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  json layers = json::array();
  for (const auto& e : m.layers) {
    layers.push_back({{"id", e.id},
                      {"dim", e.dim},
                      {"train", relative_or_absolute(e.train, base)},
                      {"test", relative_or_absolute(e.test, base)}});
  }
  json j = {{"dataset", m.dataset},
            {"n_train", m.n_train},
            {"n_test", m.n_test},
            {"n_classes", m.n_classes},
            {"dtype", m.dtype},
            {"layers", layers},
            {"labels",
             {{"train", relative_or_absolute(m.labels_train, base)},
              {"test", relative_or_absolute(m.labels_test, base)}}},
            {"producer", m.producer.is_null() ? json::object() : m.producer}};
  if (m.raw) {
    j["raw"] = {{"dim", m.raw->dim},
                {"train", relative_or_absolute(m.raw->train, base)},
                {"test", relative_or_absolute(m.raw->test, base)}};
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace sketchfer
