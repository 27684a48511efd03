#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace sketchfer {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowBlock = Eigen::Ref<const RowMatrix>;

/// Per-layer feature matrix: rows are samples, columns are flattened features.
struct FeatureMatrix {
  RowMatrix data;
  int layer_id = 0;

  Index n_rows() const { return data.rows(); }
  Index n_cols() const { return data.cols(); }
};

/// Throws non_finite_data if any entry is NaN or infinite.
void require_finite(const RowBlock& block, const char* what);

/// One-hot label matrix (N x c). Every row has exactly one 1.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  /// Validates the one-hot invariant.
  explicit LabelMatrix(RowMatrix one_hot);

  static LabelMatrix from_labels(std::span<const int> labels, int n_classes);

  const RowMatrix& data() const { return data_; }
  Index rows() const { return data_.rows(); }
  int n_classes() const { return static_cast<int>(data_.cols()); }
  std::vector<int> labels() const;
  LabelMatrix select_rows(std::span<const Index> rows) const;

 private:
  RowMatrix data_;
};

}  // namespace sketchfer
