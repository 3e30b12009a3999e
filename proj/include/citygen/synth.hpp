#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "citygen/geo.hpp"
#include "citygen/raster.hpp"

namespace citygen::synth {

using geo::HeightField;
using geo::SemanticMap;

// Layout patch geometry: 512 px patches, 16x downsampling, 25% overlap.
struct PatchSpec {
  int patch_px = 512;
  int downsample = 16;
  double overlap = 0.25;

  int token_side() const { return patch_px / downsample; }
  int stride_px() const { return static_cast<int>(patch_px * (1.0 - overlap)); }
  void validate() const;
};

struct Codebook {
  int K = 512;
  int D = 512;
  std::vector<float> entries;  // K * D, row-major

  std::span<const float> entry(int k) const {
    return std::span<const float>(entries).subspan(static_cast<std::size_t>(k) * D, D);
  }
  void validate() const;
};

// Little-endian: u32 K, u32 D, then K*D float32.
void save_codebook(const std::filesystem::path& path, const Codebook& codebook);
Codebook load_codebook(const std::filesystem::path& path);

inline constexpr std::int32_t kMaskToken = -1;

struct TokenGrid {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> cells;

  TokenGrid() = default;
  TokenGrid(int w, int h, std::int32_t fill = kMaskToken)
      : width(w), height(h), cells(static_cast<std::size_t>(w) * h, fill) {}

  std::int32_t& at(int x, int y) { return cells[static_cast<std::size_t>(y) * width + x]; }
  std::int32_t at(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x]; }
  bool is_masked(int x, int y) const { return at(x, y) == kMaskToken; }
  std::size_t masked_count() const;

  TokenGrid crop(int x0, int y0, int w, int h) const;
  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;
};

struct LayoutPatch {
  SemanticMap semantic;
  HeightField height;
};

// Maps layout patches to token grids and back (stand-in for a trained
// VQ autoencoder). Inputs must be multiples of block_size() on both axes.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual int block_size() const = 0;
  virtual int vocabulary_size() const = 0;
  virtual TokenGrid encode(const LayoutPatch& patch) const = 0;
  virtual LayoutPatch decode(const TokenGrid& tokens) const = 0;
};

// Fills every masked token of a local grid; context tokens must be returned
// unchanged. Must be deterministic in (grid, seed).
class TokenSampler {
 public:
  virtual ~TokenSampler() = default;
  virtual TokenGrid sample(const TokenGrid& masked, std::uint64_t seed) const = 0;
};

struct Exemplar {
  SemanticClass cls = SemanticClass::kOthers;
  std::uint16_t height = 0;
};

// Each token is a uniform block with one (class, height) signature.
// Vocabulary (K = 512): road@4, water@0, others@0, construction@0,
// green@8..16, then buildings@1..499.
class ExemplarTokenizer final : public Tokenizer {
 public:
  explicit ExemplarTokenizer(int block = 16);

  int block_size() const override { return block_; }
  int vocabulary_size() const override { return static_cast<int>(exemplars_.size()); }
  TokenGrid encode(const LayoutPatch& patch) const override;
  LayoutPatch decode(const TokenGrid& tokens) const override;

  const Exemplar& exemplar(std::int32_t token) const { return exemplars_.at(static_cast<std::size_t>(token)); }
  // Nearest exemplar of `cls` to `height`.
  std::int32_t token_for(SemanticClass cls, double height) const;
  // Embedding table: one-hot class in dims 0..6, height / 64 in dim 7.
  Codebook codebook(int dim = 512) const;

 private:
  int block_;
  std::vector<Exemplar> exemplars_;
  std::array<std::int32_t, kNumMapClasses> first_{};
  std::array<std::int32_t, kNumMapClasses> count_{};
};

// Rule-based city synthesis in token space: grid roads 1 token wide,
// rectangular blocks filled with building lots, parks, water, construction
// or open ground. Road lines found in the context are extended through the
// masked area, so roads stay continuous across window seams.
class ProceduralSampler final : public TokenSampler {
 public:
  struct Params {
    int min_road_gap = 5;  // tokens between parallel roads (incl. the road)
    int max_road_gap = 10;
    // Relative weights: buildings, green, others, construction, water.
    std::array<double, 5> block_weights{0.58, 0.16, 0.10, 0.06, 0.10};
    int min_building_height = 8;
    int max_building_height = 160;
  };

  explicit ProceduralSampler(std::shared_ptr<const ExemplarTokenizer> vocab);
  ProceduralSampler(std::shared_ptr<const ExemplarTokenizer> vocab, Params params);

  TokenGrid sample(const TokenGrid& masked, std::uint64_t seed) const override;

 private:
  std::shared_ptr<const ExemplarTokenizer> vocab_;
  Params params_;
};

// Fills masked cell (x, y) with source(x mod w, y mod h). For tests.
class ReplaySampler final : public TokenSampler {
 public:
  explicit ReplaySampler(TokenGrid source);
  TokenGrid sample(const TokenGrid& masked, std::uint64_t seed) const override;

 private:
  TokenGrid source_;
};

// Sampler/tokenizer lookup by name: "procedural", "replay:<token>".
std::shared_ptr<const ExemplarTokenizer> default_tokenizer();
std::unique_ptr<TokenSampler> make_sampler(const std::string& name);

struct Placement {
  int x = 0, y = 0;  // pixel offset of the patch
  std::size_t context_tokens = 0;
  std::size_t sampled_tokens = 0;
  friend bool operator==(const Placement& a, const Placement& b) { return a.x == b.x && a.y == b.y; }
};

// Row-major patch offsets covering [0, extent) with the patch stride; the
// last offset on each axis is clamped to extent - patch.
std::vector<int> placement_offsets(int extent, const PatchSpec& spec);

struct SynthResult {
  SemanticMap semantic;
  HeightField height;
  TokenGrid tokens;  // global token grid after synthesis
  std::vector<Placement> placements;
};

// Sliding-window unbounded generation. W, H must be >= patch_px and
// multiples of the downsample factor.
SynthResult extrapolate(int width, int height, const Tokenizer& tokenizer,
                        const TokenSampler& sampler, std::uint64_t seed,
                        const PatchSpec& spec = {});

// Re-samples the tokens whose blocks intersect `region` (nonzero cells),
// holding every other token as context. Only cells inside the region are
// rewritten.
SynthResult inpaint(const SemanticMap& semantic, const HeightField& height,
                    const Raster<std::uint8_t>& region, const Tokenizer& tokenizer,
                    const TokenSampler& sampler, std::uint64_t seed, const PatchSpec& spec = {});

// Region grown to whole token blocks.
Raster<std::uint8_t> dilate_to_blocks(const Raster<std::uint8_t>& region, int block);

// ---- patch metrics --------------------------------------------------------

using LogitMap = Raster<std::array<double, kNumMapClasses>>;

double height_l1(const HeightField& pred, const HeightField& gt);
double semantic_cross_entropy(const LogitMap& logits, const SemanticMap& gt);
// Edge-aware smoothness: mean_x(|dx pred| * exp(-w * [class changes along x]))
// + mean_y(...). Zero on constant fields.
double height_smoothness(const HeightField& pred, const SemanticMap& guide, double edge_weight = 10.0);

struct MetricConfig {
  double lambda_l1 = 10.0;
  double lambda_smooth = 10.0;
  double lambda_ce = 1.0;
};

struct PatchMetrics {
  double l1 = 0, smoothness = 0, cross_entropy = 0, combined = 0;
};

PatchMetrics patch_metrics(const HeightField& pred_h, const HeightField& gt_h, const LogitMap& logits,
                           const SemanticMap& gt_s, const MetricConfig& config = {});

}  // namespace citygen::synth
