#pragma once

#include "sketchfer/types.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

namespace sketchfer {

/// A replayable stream of row blocks. Every call to for_each_block visits the
/// same rows in the same order.
class RowBlockSource {
 public:
  using Visitor = std::function<void(const RowBlock&)>;

  virtual ~RowBlockSource() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual void for_each_block(const Visitor& visit) const = 0;
};

/// Blocks over an in-memory matrix (not owned).
class MatrixBlockSource final : public RowBlockSource {
 public:
  MatrixBlockSource(const RowMatrix& m, Index block_rows = 1024);

  Index rows() const override { return m_->rows(); }
  Index cols() const override { return m_->cols(); }
  void for_each_block(const Visitor& visit) const override;

 private:
  const RowMatrix* m_;
  Index block_rows_;
};

/// Blocks read from a 2-D NPY file, optionally restricted to a sorted subset
/// of rows. Entries are checked for finiteness as they are read.
class NpyRowSource final : public RowBlockSource {
 public:
  explicit NpyRowSource(std::filesystem::path path, Index block_rows = 1024);
  NpyRowSource(std::filesystem::path path, std::vector<Index> row_subset, Index block_rows = 1024);

  Index rows() const override;
  Index cols() const override { return cols_; }
  void for_each_block(const Visitor& visit) const override;

 private:
  std::filesystem::path path_;
  std::vector<Index> subset_;
  bool use_subset_ = false;
  Index file_rows_ = 0;
  Index cols_ = 0;
  Index block_rows_;
};

/// Wraps an upstream source: the first pass streams it while spilling every
/// block to a float64 NPY file under `cache_dir`; later passes replay the
/// file. The file is removed on destruction.
class CachedBlockSource final : public RowBlockSource {
 public:
  CachedBlockSource(const RowBlockSource& upstream, std::filesystem::path cache_file,
                    Index block_rows = 1024);
  ~CachedBlockSource() override;

  CachedBlockSource(const CachedBlockSource&) = delete;
  CachedBlockSource& operator=(const CachedBlockSource&) = delete;

  Index rows() const override { return upstream_->rows(); }
  Index cols() const override { return upstream_->cols(); }
  void for_each_block(const Visitor& visit) const override;

  const std::filesystem::path& cache_file() const { return file_; }
  bool cached() const { return cached_; }

 private:
  const RowBlockSource* upstream_;
  std::filesystem::path file_;
  Index block_rows_;
  mutable bool cached_ = false;
};

/// Cache directory: $SKETCHFER_CACHE_DIR if set, else `fallback`.
std::filesystem::path cache_directory(const std::filesystem::path& fallback);

/// Materializes a whole source in memory.
RowMatrix collect_rows(const RowBlockSource& source);

}  // namespace sketchfer
