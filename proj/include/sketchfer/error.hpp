#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sketchfer {

enum class Errc {
  invalid_dimensions,
  row_count_mismatch,
  dimension_mismatch,
  too_large,
  degenerate_sketch,
  not_symmetric,
  sample_count_mismatch,
  no_signal,
  zero_kernel,
  empty_support,
  degenerate_features,
  single_sample,
  singular_system,
  no_unlabeled,
  nonpositive_temperature,
  label_out_of_range,
  invalid_labels,
  invalid_argument,
  class_exhausted,
  missing_file,
  shape_mismatch,
  non_finite_data,
  invalid_manifest,
  invalid_config,
  io,
};

std::string_view errc_name(Errc code) noexcept;

/// Bad user input (config, manifest, data files) as opposed to a numerical or
/// I/O failure during a run. The CLI maps these to exit code 2.
bool is_validation_error(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

/// Runs `fn`, re-throwing any Error with `stage` prefixed to the message.
template <typename Fn>
decltype(auto) with_stage(std::string_view stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.detail());
  }
}

}  // namespace sketchfer
