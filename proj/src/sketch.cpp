#include "sketchfer/sketch.hpp"

#include "sketchfer/error.hpp"
#include "sketchfer/random.hpp"
#include "sketchfer/row_source.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace sketchfer {

namespace {

constexpr Index kMaxMaterializedEntries = 10'000'000;

std::string dims_string(Index n_input, Index n_buckets, Index n_stacks) {
  return "n_input=" + std::to_string(n_input) + " n_buckets=" + std::to_string(n_buckets) +
         " n_stacks=" + std::to_string(n_stacks);
}

}  // namespace

SketchSpec make_sketch(std::uint64_t seed, Index n_input, Index n_buckets, Index n_stacks) {
  if (n_input < 1 || n_stacks < 1 || n_buckets < n_stacks || n_buckets % n_stacks != 0) {
    throw Error(Errc::invalid_dimensions, dims_string(n_input, n_buckets, n_stacks));
  }
  if (n_buckets / n_stacks > Index{1} << 32) {
    throw Error(Errc::invalid_dimensions, "too many buckets per stack");
  }
  SketchSpec spec;
  spec.seed_ = seed;
  spec.n_input_ = n_input;
  spec.n_buckets_ = n_buckets;
  spec.n_stacks_ = n_stacks;
  spec.scale_ = 1.0 / std::sqrt(static_cast<double>(n_stacks));
  return spec;
}

SketchSpec SketchSpec::identity(Index n) {
  if (n < 1) {
    throw Error(Errc::invalid_dimensions, "identity sketch needs n >= 1");
  }
  SketchSpec spec;
  spec.n_input_ = n;
  spec.n_buckets_ = n;
  spec.n_stacks_ = 1;
  spec.scale_ = 1.0;
  spec.identity_ = true;
  return spec;
}

SketchSpec::Entry SketchSpec::locate(Index stack, Index item) const {
  if (identity_) return {item, 1.0};
  const std::uint64_t key = derive_seed(seed_, static_cast<std::uint64_t>(stack));
  const std::uint64_t h = mix64(key ^ mix64(static_cast<std::uint64_t>(item)));
  const auto per_stack = static_cast<std::uint64_t>(buckets_per_stack());
  // Upper 32 bits pick the bucket (multiply-shift range reduction), lowest bit the sign.
  const auto local = static_cast<Index>(((h >> 32) * per_stack) >> 32);
  const double sign = (h & 1U) != 0 ? -1.0 : 1.0;
  return {stack * static_cast<Index>(per_stack) + local, sign * scale_};
}

RowSketcher::RowSketcher(const SketchSpec& spec, Index n_cols)
    : spec_(&spec), acc_(RowMatrix::Zero(spec.n_buckets(), n_cols)) {}

void RowSketcher::push(const RowBlock& block) {
  if (block.cols() != acc_.cols()) {
    throw Error(Errc::dimension_mismatch, "row block has " + std::to_string(block.cols()) +
                                              " columns, expected " +
                                              std::to_string(acc_.cols()));
  }
  if (rows_seen_ + block.rows() > spec_->n_input()) {
    throw Error(Errc::row_count_mismatch,
                "stream exceeds n_input=" + std::to_string(spec_->n_input()));
  }
  const Index stacks = spec_->n_stacks();
  for (Index r = 0; r < block.rows(); ++r) {
    const Index item = rows_seen_ + r;
    for (Index j = 0; j < stacks; ++j) {
      const auto e = spec_->locate(j, item);
      acc_.row(e.bucket) += e.weight * block.row(r);
    }
  }
  rows_seen_ += block.rows();
}

RowMatrix RowSketcher::finish() && {
  if (rows_seen_ != spec_->n_input()) {
    throw Error(Errc::row_count_mismatch, "stream ended after " + std::to_string(rows_seen_) +
                                              " rows, expected " +
                                              std::to_string(spec_->n_input()));
  }
  return std::move(acc_);
}

RowMatrix sketch_rows(const SketchSpec& spec, const RowBlockSource& blocks) {
  RowSketcher sketcher(spec, blocks.cols());
  blocks.for_each_block([&](const RowBlock& b) { sketcher.push(b); });
  return std::move(sketcher).finish();
}

RowMatrix sketch_rows(const SketchSpec& spec, const RowBlock& x) {
  RowSketcher sketcher(spec, x.cols());
  sketcher.push(x);
  return std::move(sketcher).finish();
}

RowMatrix sketch_features(const SketchSpec& spec, const RowBlock& x) {
  if (x.cols() != spec.n_input()) {
    throw Error(Errc::dimension_mismatch, "matrix has " + std::to_string(x.cols()) +
                                              " columns, sketch hashes " +
                                              std::to_string(spec.n_input()));
  }
  const Index stacks = spec.n_stacks();
  std::vector<SketchSpec::Entry> table(static_cast<std::size_t>(x.cols() * stacks));
  for (Index c = 0; c < x.cols(); ++c) {
    for (Index j = 0; j < stacks; ++j) {
      table[static_cast<std::size_t>(j * x.cols() + c)] = spec.locate(j, c);
    }
  }
  RowMatrix out = RowMatrix::Zero(x.rows(), spec.n_buckets());
  for (Index n = 0; n < x.rows(); ++n) {
    auto dst = out.row(n);
    const auto src = x.row(n);
    for (Index j = 0; j < stacks; ++j) {
      const auto* entries = &table[static_cast<std::size_t>(j * x.cols())];
      for (Index c = 0; c < x.cols(); ++c) {
        dst(entries[c].bucket) += entries[c].weight * src(c);
      }
    }
  }
  return out;
}

Eigen::SparseMatrix<double> materialize(const SketchSpec& spec) {
  if (spec.n_input() * spec.n_stacks() > kMaxMaterializedEntries) {
    throw Error(Errc::too_large, "sketch with " + std::to_string(spec.n_input()) + " items and " +
                                     std::to_string(spec.n_stacks()) + " stacks");
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(spec.n_input() * spec.n_stacks()));
  for (Index i = 0; i < spec.n_input(); ++i) {
    for (Index j = 0; j < spec.n_stacks(); ++j) {
      const auto e = spec.locate(j, i);
      triplets.emplace_back(e.bucket, i, e.weight);
    }
  }
  Eigen::SparseMatrix<double> s(spec.n_buckets(), spec.n_input());
  s.setFromTriplets(triplets.begin(), triplets.end());
  return s;
}

}  // namespace sketchfer
