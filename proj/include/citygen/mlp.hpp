#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace citygen::render {

enum class Activation : std::uint32_t { kNone = 0, kRelu = 1, kSigmoid = 2 };

struct DenseLayer {
  int rows = 0;  // output size
  int cols = 0;  // input size
  std::vector<float> weights;  // rows x cols, row-major
  std::vector<float> bias;     // rows
  Activation activation = Activation::kNone;
};

struct MlpWeights {
  std::vector<DenseLayer> layers;

  int input_size() const { return layers.empty() ? 0 : layers.front().cols; }
  int output_size() const { return layers.empty() ? 0 : layers.back().rows; }
  void validate() const;
};

std::vector<double> mlp_forward(const MlpWeights& weights, std::span<const double> input);

// Little-endian: u32 layer count; per layer u32 rows, u32 cols,
// u32 activation, rows*cols float32 weights, rows float32 bias.
void save_mlp(const std::filesystem::path& path, const MlpWeights& weights);
MlpWeights load_mlp(const std::filesystem::path& path);

// Seeded He-style initialization for tests and demos.
MlpWeights random_mlp(std::span<const int> sizes, Activation hidden, Activation output, std::uint64_t seed);

}  // namespace citygen::render
