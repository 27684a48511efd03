#include "sketchfer/error.hpp"
#include "sketchfer/random.hpp"
#include "sketchfer/types.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sketchfer {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_dimensions: return "invalid-dimensions";
    case Errc::row_count_mismatch: return "row-count-mismatch";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::too_large: return "too-large";
    case Errc::degenerate_sketch: return "degenerate-sketch";
    case Errc::not_symmetric: return "not-symmetric";
    case Errc::sample_count_mismatch: return "sample-count-mismatch";
    case Errc::no_signal: return "no-signal";
    case Errc::zero_kernel: return "zero-kernel";
    case Errc::empty_support: return "empty-support";
    case Errc::degenerate_features: return "degenerate-features";
    case Errc::single_sample: return "single-sample";
    case Errc::singular_system: return "singular-system";
    case Errc::no_unlabeled: return "no-unlabeled";
    case Errc::nonpositive_temperature: return "nonpositive-temperature";
    case Errc::label_out_of_range: return "label-out-of-range";
    case Errc::invalid_labels: return "invalid-labels";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::class_exhausted: return "class-exhausted";
    case Errc::missing_file: return "missing-file";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::non_finite_data: return "non-finite-data";
    case Errc::invalid_manifest: return "invalid-manifest";
    case Errc::invalid_config: return "invalid-config";
    case Errc::io: return "io";
  }
  return "unknown";
}

bool is_validation_error(Errc code) noexcept {
  switch (code) {
    case Errc::missing_file:
    case Errc::shape_mismatch:
    case Errc::non_finite_data:
    case Errc::invalid_manifest:
    case Errc::invalid_config:
    case Errc::invalid_labels:
    case Errc::label_out_of_range:
    case Errc::class_exhausted:
      return true;
    default:
      return false;
  }
}

void require_finite(const RowBlock& block, const char* what) {
  if (!block.allFinite()) {
    throw Error(Errc::non_finite_data, std::string(what) + " contains NaN or Inf");
  }
}

LabelMatrix::LabelMatrix(RowMatrix one_hot) : data_(std::move(one_hot)) {
  for (Index i = 0; i < data_.rows(); ++i) {
    int ones = 0;
    for (Index j = 0; j < data_.cols(); ++j) {
      const double v = data_(i, j);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) {
      throw Error(Errc::invalid_labels, "row " + std::to_string(i) + " is not one-hot");
    }
  }
}

LabelMatrix LabelMatrix::from_labels(std::span<const int> labels, int n_classes) {
  if (n_classes < 1) {
    throw Error(Errc::invalid_labels, "class count must be positive");
  }
  RowMatrix y = RowMatrix::Zero(static_cast<Index>(labels.size()), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      throw Error(Errc::label_out_of_range,
                  "label " + std::to_string(labels[i]) + " at row " + std::to_string(i));
    }
    y(static_cast<Index>(i), labels[i]) = 1.0;
  }
  LabelMatrix out;
  out.data_ = std::move(y);
  return out;
}

std::vector<int> LabelMatrix::labels() const {
  std::vector<int> out(static_cast<std::size_t>(data_.rows()));
  for (Index i = 0; i < data_.rows(); ++i) {
    Index arg = 0;
    data_.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

LabelMatrix LabelMatrix::select_rows(std::span<const Index> rows) const {
  LabelMatrix out;
  out.data_.resize(static_cast<Index>(rows.size()), data_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.data_.row(static_cast<Index>(i)) = data_.row(rows[i]);
  }
  return out;
}

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % n;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace sketchfer
