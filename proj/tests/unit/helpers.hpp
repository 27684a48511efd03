#pragma once

#include "sketchfer/random.hpp"
#include "sketchfer/types.hpp"

#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

namespace testing {

using sketchfer::Index;
using sketchfer::RowMatrix;

inline RowMatrix random_matrix(sketchfer::SeededRng& rng, Index rows, Index cols) {
  RowMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

inline std::vector<int> random_labels(sketchfer::SeededRng& rng, Index n, int classes) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(i % classes);
  rng.shuffle(std::span<int>(y));
  return y;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sketchfer_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline double max_abs_diff(const Eigen::Ref<const RowMatrix>& a, const Eigen::Ref<const RowMatrix>& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

}  // namespace testing

#define CHECK_THROWS_CODE(expr, errc)                                  \
  do {                                                                 \
    bool thrown_ = false;                                              \
    try {                                                              \
      (void)(expr);                                                    \
    } catch (const sketchfer::Error& e_) {                             \
      thrown_ = true;                                                  \
      CHECK_MESSAGE(e_.code() == (errc), e_.what());                   \
    }                                                                  \
    CHECK_MESSAGE(thrown_, "expected sketchfer::Error from " #expr);   \
  } while (false)
