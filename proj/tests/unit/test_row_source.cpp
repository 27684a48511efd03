#include "helpers.hpp"

#include "sketchfer/error.hpp"
#include "sketchfer/npy.hpp"
#include "sketchfer/row_source.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

using namespace sketchfer;
using testing::TempDir;

TEST_CASE("MatrixBlockSource covers every row once, in order") {
  SeededRng rng(1);
  const RowMatrix m = testing::random_matrix(rng, 23, 3);
  MatrixBlockSource src(m, 5);
  std::vector<Index> sizes;
  RowMatrix joined(0, 3);
  src.for_each_block([&](const RowBlock& b) {
    sizes.push_back(b.rows());
    joined.conservativeResize(joined.rows() + b.rows(), 3);
    joined.bottomRows(b.rows()) = b;
  });
  CHECK(sizes == std::vector<Index>{5, 5, 5, 5, 3});
  CHECK(joined == m);
  CHECK(collect_rows(src) == m);
}

TEST_CASE("NpyRowSource restricted to a subset returns those rows") {
  TempDir dir("src");
  SeededRng rng(2);
  const RowMatrix m = testing::random_matrix(rng, 40, 6);
  npy::save_matrix(dir / "m.npy", m);
  const std::vector<Index> subset{0, 1, 2, 7, 8, 20, 39};
  NpyRowSource src(dir / "m.npy", subset, 3);
  CHECK(src.rows() == 7);
  const RowMatrix got = collect_rows(src);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    CHECK(got.row(static_cast<Index>(i)) == m.row(subset[i]));
  }
  CHECK_THROWS_AS(NpyRowSource(dir / "m.npy", std::vector<Index>{3, 2}), Error);
  CHECK_THROWS_AS(NpyRowSource(dir / "m.npy", std::vector<Index>{40}), Error);
}

TEST_CASE("NpyRowSource flags non-finite entries") {
  TempDir dir("src");
  RowMatrix m = RowMatrix::Ones(4, 2);
  m(2, 1) = std::numeric_limits<double>::quiet_NaN();
  npy::save_matrix(dir / "nan.npy", m);
  CHECK_THROWS_CODE(collect_rows(NpyRowSource(dir / "nan.npy")), Errc::non_finite_data);
}

TEST_CASE("CachedBlockSource replays from disk and cleans up") {
  TempDir dir("src");
  SeededRng rng(3);
  const RowMatrix m = testing::random_matrix(rng, 30, 4);
  npy::save_matrix_f32(dir / "m.npy", m);
  NpyRowSource upstream(dir / "m.npy", 7);
  const auto cache = dir / "cache" / "layer.npy";
  {
    CachedBlockSource cached(upstream, cache, 7);
    CHECK_FALSE(cached.cached());
    const RowMatrix first = collect_rows(cached);
    CHECK(cached.cached());
    CHECK(std::filesystem::exists(cache));
    const RowMatrix second = collect_rows(cached);
    CHECK(first == second);
    CHECK(first == collect_rows(upstream));
  }
  CHECK_FALSE(std::filesystem::exists(cache));
}

TEST_CASE("cache_directory honors SKETCHFER_CACHE_DIR") {
  ::unsetenv("SKETCHFER_CACHE_DIR");
  CHECK(cache_directory("fallback") == std::filesystem::path("fallback"));
  ::setenv("SKETCHFER_CACHE_DIR", "/tmp/elsewhere", 1);
  CHECK(cache_directory("fallback") == std::filesystem::path("/tmp/elsewhere"));
  ::unsetenv("SKETCHFER_CACHE_DIR");
}
