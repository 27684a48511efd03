#pragma once

#include "sketchfer/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sketchfer::synth {

struct LayerSpec {
  Index dim = 64;
  double signal = 0.0;  // class-mean separation in units of the noise std
};

/// Per-layer features x = A_l h + e + signal_l * m_{l,y}: a latent nuisance h
/// shared by all layers (so layers are correlated), isotropic noise e and
/// class means m_{l,c} with ||m_{l,c}|| ~ 1. Labels are balanced.
struct SynthOptions {
  Index n_train = 1000;
  Index n_test = 500;
  int n_classes = 5;
  std::vector<LayerSpec> layers{{64, 0.0}, {128, 0.0}, {256, 3.0}, {96, 0.0}};
  Index latent_dim = 16;
  double nuisance = 1.0;
  Index raw_dim = 0;        // 0: no raw inputs
  double raw_signal = 1.5;
  std::uint64_t seed = 0;
  std::string dataset = "synthetic";
};

struct SynthData {
  std::vector<RowMatrix> train;
  std::vector<RowMatrix> test;
  RowMatrix raw_train;
  RowMatrix raw_test;
  std::vector<int> train_labels;
  std::vector<int> test_labels;
};

SynthData make_synthetic(const SynthOptions& opts);

/// Writes float32 layer files, int64 labels and manifest.json under `dir`.
/// Layer ids are 0..L-1. Returns the manifest path.
std::filesystem::path write_synthetic(const std::filesystem::path& dir, const SynthOptions& opts);

}  // namespace sketchfer::synth
