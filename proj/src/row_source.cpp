#include "sketchfer/row_source.hpp"

#include "sketchfer/error.hpp"
#include "sketchfer/npy.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <system_error>

namespace sketchfer {

MatrixBlockSource::MatrixBlockSource(const RowMatrix& m, Index block_rows)
    : m_(&m), block_rows_(std::max<Index>(1, block_rows)) {}

void MatrixBlockSource::for_each_block(const Visitor& visit) const {
  for (Index first = 0; first < m_->rows(); first += block_rows_) {
    const Index count = std::min(block_rows_, m_->rows() - first);
    visit(m_->middleRows(first, count));
  }
}

NpyRowSource::NpyRowSource(std::filesystem::path path, Index block_rows)
    : path_(std::move(path)), block_rows_(std::max<Index>(1, block_rows)) {
  const auto h = npy::read_header(path_);
  file_rows_ = static_cast<Index>(h.rows());
  cols_ = static_cast<Index>(h.cols());
}

NpyRowSource::NpyRowSource(std::filesystem::path path, std::vector<Index> row_subset,
                           Index block_rows)
    : NpyRowSource(std::move(path), block_rows) {
  if (!std::is_sorted(row_subset.begin(), row_subset.end())) {
    throw Error(Errc::invalid_argument, "row subset must be sorted");
  }
  if (!row_subset.empty() && (row_subset.front() < 0 || row_subset.back() >= file_rows_)) {
    throw Error(Errc::invalid_argument, "row subset out of range for " + path_.string());
  }
  subset_ = std::move(row_subset);
  use_subset_ = true;
}

Index NpyRowSource::rows() const {
  return use_subset_ ? static_cast<Index>(subset_.size()) : file_rows_;
}

void NpyRowSource::for_each_block(const Visitor& visit) const {
  npy::RowReader reader(path_);
  const std::string name = path_.string();
  if (!use_subset_) {
    for (Index first = 0; first < file_rows_; first += block_rows_) {
      const RowMatrix block = reader.read(first, std::min(block_rows_, file_rows_ - first));
      require_finite(block, name.c_str());
      visit(block);
    }
    return;
  }
  // Gather each output block from runs of consecutive file rows.
  RowMatrix block;
  for (std::size_t pos = 0; pos < subset_.size();) {
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(block_rows_),
                                                    subset_.size() - pos);
    block.resize(static_cast<Index>(count), cols_);
    for (std::size_t k = 0; k < count;) {
      std::size_t run = 1;
      while (k + run < count && subset_[pos + k + run] == subset_[pos + k] + static_cast<Index>(run)) {
        ++run;
      }
      block.middleRows(static_cast<Index>(k), static_cast<Index>(run)) =
          reader.read(subset_[pos + k], static_cast<Index>(run));
      k += run;
    }
    require_finite(block, name.c_str());
    visit(block);
    pos += count;
  }
}

CachedBlockSource::CachedBlockSource(const RowBlockSource& upstream,
                                     std::filesystem::path cache_file, Index block_rows)
    : upstream_(&upstream), file_(std::move(cache_file)),
      block_rows_(std::max<Index>(1, block_rows)) {}

CachedBlockSource::~CachedBlockSource() {
  std::error_code ec;
  std::filesystem::remove(file_, ec);
}

void CachedBlockSource::for_each_block(const Visitor& visit) const {
  if (cached_) {
    NpyRowSource(file_, block_rows_).for_each_block(visit);
    return;
  }
  if (file_.has_parent_path()) {
    std::filesystem::create_directories(file_.parent_path());
  }
  npy::RowWriter writer(file_, upstream_->rows(), upstream_->cols());
  upstream_->for_each_block([&](const RowBlock& block) {
    writer.append(block);
    visit(block);
  });
  writer.close();
  cached_ = true;
}

std::filesystem::path cache_directory(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("SKETCHFER_CACHE_DIR"); env != nullptr && *env != '\0') {
    return std::filesystem::path(env);
  }
  return fallback;
}

RowMatrix collect_rows(const RowBlockSource& source) {
  RowMatrix out(source.rows(), source.cols());
  Index at = 0;
  source.for_each_block([&](const RowBlock& b) {
    out.middleRows(at, b.rows()) = b;
    at += b.rows();
  });
  return out;
}

}  // namespace sketchfer
