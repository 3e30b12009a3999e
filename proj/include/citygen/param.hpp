#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "citygen/geo.hpp"
#include "citygen/math.hpp"
#include "citygen/mlp.hpp"

namespace citygen::param {

inline constexpr std::array<std::uint64_t, 5> kHashPrimes{1ull, 2654435761ull, 805459861ull, 3674653429ull,
                                                          2097192037ull};

struct HashGridConfig {
  int levels = 16;
  std::uint32_t table_size = 1u << 19;
  int channels = 8;
  double base_resolution = 16;
  // Finest level resolution; positions are given in voxels of a window of
  // this side length, so the finest lattice has one cell per voxel.
  double max_resolution = 1536;
  int feature_dim = 2;
  double quantization = 1024;
  // Spatial x, y, z first, then one prime per global-feature component.
  std::vector<std::uint64_t> primes{kHashPrimes.begin(), kHashPrimes.end()};

  double growth() const;
  double resolution(int level) const;
  int output_size() const { return levels * channels; }
  void validate() const;
};

// (XOR_m lattice[m] * primes[m]) mod T with wrapping 64-bit products.
std::uint32_t hash_index(std::span<const std::int64_t> lattice, const HashGridConfig& config);
std::vector<std::int64_t> quantize_feature(std::span<const double> f_G, const HashGridConfig& config);

class HashGridTable {
 public:
  // Seeded uniform entries in [-1e-4, 1e-4].
  static HashGridTable random(const HashGridConfig& config, std::uint64_t seed);
  HashGridTable(HashGridConfig config, std::uint64_t seed, std::vector<float> data);

  const HashGridConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::span<const float> entry(int level, std::uint32_t index) const {
    return std::span<const float>(data_).subspan(
        (static_cast<std::size_t>(level) * config_.table_size + index) * config_.channels, config_.channels);
  }
  std::span<float> entry(int level, std::uint32_t index) {
    return std::span<float>(data_).subspan(
        (static_cast<std::size_t>(level) * config_.table_size + index) * config_.channels, config_.channels);
  }
  const std::vector<float>& data() const { return data_; }

 private:
  HashGridConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<float> data_;
};

// Little-endian: u32 levels, u32 T, u32 channels, u64 seed, then floats.
void save_table(const std::filesystem::path& path, const HashGridTable& table);
HashGridTable load_table(const std::filesystem::path& path, HashGridConfig base = {});

struct GlobalFeature {
  std::vector<double> values;
};

// Multi-resolution lookup at p (voxels, each component in [0, max_resolution]).
// Corners are hashed together with the quantized f_G; interpolation is
// trilinear over space only. Output has levels * channels values.
void grid_lookup(const Vec3& p, std::span<const std::int64_t> quantized_f, const HashGridTable& table,
                 std::span<double> out);
std::vector<double> grid_lookup(const Vec3& p, const GlobalFeature& f_G, const HashGridTable& table);

inline constexpr int kSinCosLevels = 10;

// {sin(2^i pi x), cos(2^i pi x)} for i = 0..L-1 per value, pairs ascending.
void sincos_encode(std::span<const double> x, int levels, std::span<double> out);
std::vector<double> sincos_encode(std::span<const double> x, int levels = kSinCosLevels);

inline constexpr int kBuildingFeatureChannels = 63;

// Per-cell feature map over a rectangle of a building window.
struct PixelFeatureMap {
  int x0 = 0, y0 = 0;  // window cell of the first entry
  int width = 0, height = 0;
  int channels = kBuildingFeatureChannels;
  std::vector<float> data;

  PixelFeatureMap() = default;
  PixelFeatureMap(int x0_, int y0_, int w, int h, int c)
      : x0(x0_), y0(y0_), width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, 0.f) {}

  bool contains(int x, int y) const { return x >= x0 && y >= y0 && x < x0 + width && y < y0 + height; }
  std::span<const float> at(int x, int y) const {
    return std::span<const float>(data).subspan(
        (static_cast<std::size_t>(y - y0) * width + (x - x0)) * channels, channels);
  }
  std::span<float> at(int x, int y) {
    return std::span<float>(data).subspan(
        (static_cast<std::size_t>(y - y0) * width + (x - x0)) * channels, channels);
  }
};

// concat(f_B at the cell containing (p_x, p_y), 2 p_z / depth - 1), then
// sincos-encoded: 2 * L * (channels + 1) values.
void building_feature(const Vec3& p, const PixelFeatureMap& f_B, double depth, int levels, std::span<double> out);
std::vector<double> building_feature(const Vec3& p, const PixelFeatureMap& f_B, double depth,
                                     int levels = kSinCosLevels);

struct StyleCode {
  std::vector<double> z;
  static StyleCode random(std::uint64_t seed, int length = 256);
};

// A rectangle of window cells.
struct CellRect {
  int x0 = 0, y0 = 0, width = 0, height = 0;
};

// Scene encoders. Local encoders are per-cell, so a sub-rectangle can be
// encoded without the rest of the window.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual GlobalFeature global(const geo::HeightField& h, const geo::SemanticMap& s) const = 0;
  virtual PixelFeatureMap local(const geo::HeightField& h, const geo::SemanticMap& s, CellRect rect) const = 0;
  PixelFeatureMap local(const geo::HeightField& h, const geo::SemanticMap& s) const {
    return local(h, s, CellRect{0, 0, h.width(), h.height()});
  }
};

// f_G = [mean height / depth, building-cell fraction].
// f_B = [2 h / depth - 1, one-hot label (9), seeded per-cell noise (53)].
class ProceduralEncoder : public Encoder {
 public:
  explicit ProceduralEncoder(std::uint64_t seed = 0, double depth = 640) : seed_(seed), depth_(depth) {}
  GlobalFeature global(const geo::HeightField& h, const geo::SemanticMap& s) const override;
  PixelFeatureMap local(const geo::HeightField& h, const geo::SemanticMap& s, CellRect rect) const override;
  using Encoder::local;

 private:
  std::uint64_t seed_;
  double depth_;
};

// Per-cell MLP: input [2 h / depth - 1, one-hot label (9)] (10 values),
// output 63 channels clamped to [-1, 1]. Global feature as ProceduralEncoder.
class MlpEncoder : public Encoder {
 public:
  MlpEncoder(render::MlpWeights weights, double depth = 640);
  GlobalFeature global(const geo::HeightField& h, const geo::SemanticMap& s) const override;
  PixelFeatureMap local(const geo::HeightField& h, const geo::SemanticMap& s, CellRect rect) const override;
  using Encoder::local;

 private:
  render::MlpWeights weights_;
  double depth_;
};

}  // namespace citygen::param
