#include "citygen/mlp.hpp"

#include <cmath>
#include <fstream>

#include "citygen/binary_io.hpp"
#include "citygen/errors.hpp"
#include "citygen/rng.hpp"

namespace citygen::render {

void MlpWeights::validate() const {
  if (layers.empty()) throw ValidationError("mlp: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.rows <= 0 || l.cols <= 0) throw ValidationError("mlp: layer " + std::to_string(i) + " has no units");
    if (l.weights.size() != static_cast<std::size_t>(l.rows) * l.cols || l.bias.size() != static_cast<std::size_t>(l.rows))
      throw ValidationError("mlp: layer " + std::to_string(i) + " has wrong parameter count");
    if (i > 0 && l.cols != layers[i - 1].rows)
      throw ValidationError("mlp: layer " + std::to_string(i) + " input does not match previous output");
    if (l.activation != Activation::kNone && l.activation != Activation::kRelu && l.activation != Activation::kSigmoid)
      throw ValidationError("mlp: unknown activation");
    for (float v : l.weights)
      if (!std::isfinite(v)) throw ValidationError("mlp: non-finite weight");
    for (float v : l.bias)
      if (!std::isfinite(v)) throw ValidationError("mlp: non-finite bias");
  }
}

std::vector<double> mlp_forward(const MlpWeights& weights, std::span<const double> input) {
  if (weights.layers.empty()) throw ValidationError("mlp: no layers");
  if (static_cast<int>(input.size()) != weights.input_size())
    throw ValidationError("mlp: input has " + std::to_string(input.size()) + " values, expected " +
                          std::to_string(weights.input_size()));
  std::vector<double> cur(input.begin(), input.end()), next;
  for (const auto& l : weights.layers) {
    if (static_cast<int>(cur.size()) != l.cols) throw ValidationError("mlp: layer shape mismatch");
    next.assign(static_cast<std::size_t>(l.rows), 0.0);
    for (int r = 0; r < l.rows; ++r) {
      const float* row = l.weights.data() + static_cast<std::size_t>(r) * l.cols;
      double acc = l.bias[r];
      for (int c = 0; c < l.cols; ++c) acc += static_cast<double>(row[c]) * cur[c];
      switch (l.activation) {
        case Activation::kRelu:
          acc = acc > 0 ? acc : 0;
          break;
        case Activation::kSigmoid:
          acc = 1.0 / (1.0 + std::exp(-acc));
          break;
        case Activation::kNone:
          break;
      }
      next[r] = acc;
    }
    cur.swap(next);
  }
  return cur;
}

void save_mlp(const std::filesystem::path& path, const MlpWeights& weights) {
  weights.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(weights.layers.size()));
  for (const auto& l : weights.layers) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.rows));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.cols));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.activation));
    for (float v : l.weights) io::write_le(out, v);
    for (float v : l.bias) io::write_le(out, v);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

MlpWeights load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const auto n = io::read_le<std::uint32_t>(in, "mlp");
  if (n == 0 || n > 256) throw ValidationError("mlp: implausible layer count");
  MlpWeights w;
  for (std::uint32_t i = 0; i < n; ++i) {
    DenseLayer l;
    const auto rows = io::read_le<std::uint32_t>(in, "mlp");
    const auto cols = io::read_le<std::uint32_t>(in, "mlp");
    if (rows == 0 || cols == 0 || rows > 65536 || cols > 65536) throw ValidationError("mlp: implausible layer shape");
    l.rows = static_cast<int>(rows);
    l.cols = static_cast<int>(cols);
    l.activation = static_cast<Activation>(io::read_le<std::uint32_t>(in, "mlp"));
    l.weights.resize(static_cast<std::size_t>(rows) * cols);
    l.bias.resize(rows);
    for (auto& v : l.weights) v = io::read_le<float>(in, "mlp");
    for (auto& v : l.bias) v = io::read_le<float>(in, "mlp");
    w.layers.push_back(std::move(l));
  }
  w.validate();
  return w;
}

MlpWeights random_mlp(std::span<const int> sizes, Activation hidden, Activation output, std::uint64_t seed) {
  if (sizes.size() < 2) throw ValidationError("mlp: need at least input and output sizes");
  Rng rng(seed);
  MlpWeights w;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    DenseLayer l;
    l.cols = sizes[i];
    l.rows = sizes[i + 1];
    if (l.rows <= 0 || l.cols <= 0) throw ValidationError("mlp: sizes must be positive");
    const double scale = std::sqrt(2.0 / l.cols);
    l.weights.resize(static_cast<std::size_t>(l.rows) * l.cols);
    for (auto& v : l.weights) v = static_cast<float>(rng.gaussian() * scale);
    l.bias.assign(static_cast<std::size_t>(l.rows), 0.f);
    l.activation = i + 2 == sizes.size() ? output : hidden;
    w.layers.push_back(std::move(l));
  }
  return w;
}

}  // namespace citygen::render
