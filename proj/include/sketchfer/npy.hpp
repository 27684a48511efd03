#pragma once

#include "sketchfer/types.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace sketchfer::npy {

enum class Dtype { f32, f64, i8, u8, i16, u16, i32, u32, i64, u64 };

std::size_t dtype_size(Dtype dtype) noexcept;
std::string dtype_descr(Dtype dtype);

/// Parsed NPY v1/v2/v3 header. Only little-endian (or single-byte) dtypes
/// are accepted.
struct Header {
  Dtype dtype = Dtype::f64;
  bool fortran_order = false;
  std::vector<std::int64_t> shape;
  std::streamoff data_offset = 0;

  std::int64_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::int64_t cols() const;
};

Header read_header(std::istream& in, const std::string& name);
Header read_header(const std::filesystem::path& path);

/// Whole 1-D or 2-D numeric array as a double matrix (1-D arrays become N x 1).
RowMatrix load_matrix(const std::filesystem::path& path);

/// 1-D integer (or integral-valued float) array.
std::vector<std::int64_t> load_integers(const std::filesystem::path& path);

void save_matrix(const std::filesystem::path& path, const RowBlock& m);
/// Same layout as save_matrix with `<f4` entries (rounded to nearest).
void save_matrix_f32(const std::filesystem::path& path, const RowBlock& m);
void save_integers(const std::filesystem::path& path, std::span<const std::int64_t> values);

/// Random access to row ranges of a C-order 2-D array, upcast to double.
class RowReader {
 public:
  explicit RowReader(const std::filesystem::path& path);

  const Header& header() const { return header_; }
  Index rows() const { return static_cast<Index>(header_.rows()); }
  Index cols() const { return static_cast<Index>(header_.cols()); }

  /// Rows [first, first + count).
  RowMatrix read(Index first, Index count);

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  Header header_;
  std::vector<char> buffer_;
};

/// Streams float64 rows into a C-order NPY file whose shape is fixed up front.
class RowWriter {
 public:
  RowWriter(const std::filesystem::path& path, Index rows, Index cols);

  void append(const RowBlock& block);
  /// Throws io unless exactly `rows` rows were appended.
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  Index rows_;
  Index cols_;
  Index written_ = 0;
};

}  // namespace sketchfer::npy
