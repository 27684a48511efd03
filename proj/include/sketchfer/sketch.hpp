#pragma once

#include "sketchfer/types.hpp"

#include <Eigen/SparseCore>

#include <cstdint>

namespace sketchfer {

class RowBlockSource;

/// Implicit stacked CountSketch S (n_buckets x n_input).
///
/// The output buckets are split into `n_stacks` equal ranges. Within stack j,
/// item i lands in one bucket with a random sign; every entry is scaled by
/// 1/sqrt(n_stacks), so each column of S has unit norm and E[S^T S] = I.
/// Bucket and sign are a pure function of (seed, stack, item), which keeps the
/// operator O(1) in memory and identical across processes.
class SketchSpec {
 public:
  struct Entry {
    Index bucket;   // global row of S
    double weight;  // +-1/sqrt(n_stacks)
  };

  /// Identity operator on n rows (one stack, bucket(i) = i, sign +1). Used to
  /// force the full-landmark case of the Nystrom constructions.
  static SketchSpec identity(Index n);

  std::uint64_t seed() const { return seed_; }
  Index n_input() const { return n_input_; }
  Index n_buckets() const { return n_buckets_; }
  Index n_stacks() const { return n_stacks_; }
  Index buckets_per_stack() const { return n_buckets_ / n_stacks_; }
  bool is_identity() const { return identity_; }

  /// Where item `item` goes in stack `stack`.
  Entry locate(Index stack, Index item) const;

  friend SketchSpec make_sketch(std::uint64_t seed, Index n_input, Index n_buckets,
                                Index n_stacks);

 private:
  SketchSpec() = default;

  std::uint64_t seed_ = 0;
  Index n_input_ = 0;
  Index n_buckets_ = 0;
  Index n_stacks_ = 1;
  double scale_ = 1.0;
  bool identity_ = false;
};

/// Throws invalid_dimensions unless n_buckets >= n_stacks >= 1,
/// n_buckets % n_stacks == 0 and n_input >= 1.
SketchSpec make_sketch(std::uint64_t seed, Index n_input, Index n_buckets, Index n_stacks);

/// One-pass accumulator for S * X over a stream of row blocks.
///
/// Rows are added to their buckets in arrival order, so the result does not
/// depend on how the rows are partitioned into blocks.
class RowSketcher {
 public:
  RowSketcher(const SketchSpec& spec, Index n_cols);

  void push(const RowBlock& block);
  Index rows_seen() const { return rows_seen_; }

  /// Throws row_count_mismatch unless exactly spec.n_input() rows were pushed.
  RowMatrix finish() &&;

 private:
  const SketchSpec* spec_;
  RowMatrix acc_;
  Index rows_seen_ = 0;
};

RowMatrix sketch_rows(const SketchSpec& spec, const RowBlockSource& blocks);
RowMatrix sketch_rows(const SketchSpec& spec, const RowBlock& x);

/// Feature hashing X * S^T (N x n_buckets), with spec.n_input() == X.cols().
RowMatrix sketch_features(const SketchSpec& spec, const RowBlock& x);

/// Explicit S for tests. Throws too_large beyond 1e7 stored entries.
Eigen::SparseMatrix<double> materialize(const SketchSpec& spec);

}  // namespace sketchfer
