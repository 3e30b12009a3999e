#include <algorithm>

#include "citygen/errors.hpp"
#include "citygen/rng.hpp"
#include "citygen/synth.hpp"

namespace citygen::synth {
namespace {

void check_extent(int width, int height, const PatchSpec& spec) {
  spec.validate();
  if (width < spec.patch_px || height < spec.patch_px)
    throw DomainError("target is smaller than one patch (" + std::to_string(spec.patch_px) + " px)");
  if (width % spec.downsample != 0 || height % spec.downsample != 0)
    throw DomainError("target dimensions must be multiples of " + std::to_string(spec.downsample));
}

// Runs the sampler over every placement in row-major order. Tokens that are
// already set act as context and are never rewritten.
std::vector<Placement> fill_tokens(TokenGrid& global, int width, int height, const Tokenizer& tokenizer,
                                   const TokenSampler& sampler, std::uint64_t seed,
                                   const PatchSpec& spec) {
  const int ds = spec.downsample;
  const int n = spec.token_side();
  const int K = tokenizer.vocabulary_size();
  std::vector<Placement> placements;
  std::uint64_t index = 0;
  for (int py : placement_offsets(height, spec)) {
    for (int px : placement_offsets(width, spec)) {
      Placement pl{px, py, 0, 0};
      const int tx = px / ds, ty = py / ds;
      const TokenGrid local = global.crop(tx, ty, n, n);
      pl.sampled_tokens = local.masked_count();
      pl.context_tokens = local.cells.size() - pl.sampled_tokens;
      const std::uint64_t placement_seed = hash_values(seed, index++);
      if (pl.sampled_tokens > 0) {
        const TokenGrid filled = sampler.sample(local, placement_seed);
        if (filled.width != n || filled.height != n) throw ValidationError("sampler changed the grid size");
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            const auto t = filled.at(x, y);
            if (t < 0 || t >= K) throw ValidationError("sampler left a masked or invalid token");
            if (!local.is_masked(x, y)) {
              if (t != local.at(x, y)) throw ValidationError("sampler rewrote a context token");
            } else {
              global.at(tx + x, ty + y) = t;
            }
          }
        }
      }
      placements.push_back(pl);
    }
  }
  return placements;
}

}  // namespace

std::vector<int> placement_offsets(int extent, const PatchSpec& spec) {
  spec.validate();
  if (extent < spec.patch_px) throw DomainError("extent is smaller than one patch");
  std::vector<int> out{0};
  while (out.back() + spec.patch_px < extent)
    out.push_back(std::min(out.back() + spec.stride_px(), extent - spec.patch_px));
  return out;
}

SynthResult extrapolate(int width, int height, const Tokenizer& tokenizer, const TokenSampler& sampler,
                        std::uint64_t seed, const PatchSpec& spec) {
  check_extent(width, height, spec);
  if (tokenizer.block_size() != spec.downsample)
    throw ValidationError("tokenizer block size does not match the downsample factor");
  SynthResult r;
  r.tokens = TokenGrid(width / spec.downsample, height / spec.downsample);
  r.placements = fill_tokens(r.tokens, width, height, tokenizer, sampler, seed, spec);
  LayoutPatch decoded = tokenizer.decode(r.tokens);
  r.semantic = std::move(decoded.semantic);
  r.height = std::move(decoded.height);
  return r;
}

Raster<std::uint8_t> dilate_to_blocks(const Raster<std::uint8_t>& region, int block) {
  if (block <= 0) throw ValidationError("block size must be positive");
  Raster<std::uint8_t> out(region.width(), region.height());
  const int bw = (region.width() + block - 1) / block;
  const int bh = (region.height() + block - 1) / block;
  for (int by = 0; by < bh; ++by) {
    for (int bx = 0; bx < bw; ++bx) {
      const int x1 = std::min(region.width(), (bx + 1) * block);
      const int y1 = std::min(region.height(), (by + 1) * block);
      bool hit = false;
      for (int y = by * block; y < y1 && !hit; ++y)
        for (int x = bx * block; x < x1 && !hit; ++x) hit = region(x, y) != 0;
      if (!hit) continue;
      for (int y = by * block; y < y1; ++y)
        for (int x = bx * block; x < x1; ++x) out(x, y) = 1;
    }
  }
  return out;
}

SynthResult inpaint(const SemanticMap& semantic, const HeightField& height, const Raster<std::uint8_t>& region,
                    const Tokenizer& tokenizer, const TokenSampler& sampler, std::uint64_t seed,
                    const PatchSpec& spec) {
  if (!semantic.same_shape(height)) throw ValidationError("semantic and height dimensions differ");
  if (!semantic.same_shape(region)) throw ValidationError("region dimensions differ from the layout");
  check_extent(semantic.width(), semantic.height(), spec);
  if (tokenizer.block_size() != spec.downsample)
    throw ValidationError("tokenizer block size does not match the downsample factor");
  if (std::none_of(region.storage().begin(), region.storage().end(), [](auto v) { return v != 0; }))
    throw ValidationError("inpaint region is empty");

  const int ds = spec.downsample;
  SynthResult r;
  r.tokens = tokenizer.encode(LayoutPatch{semantic, height});
  const auto blocks = dilate_to_blocks(region, ds);
  for (int ty = 0; ty < r.tokens.height; ++ty)
    for (int tx = 0; tx < r.tokens.width; ++tx)
      if (blocks(tx * ds, ty * ds)) r.tokens.at(tx, ty) = kMaskToken;
  r.placements = fill_tokens(r.tokens, semantic.width(), semantic.height(), tokenizer, sampler, seed, spec);

  const LayoutPatch decoded = tokenizer.decode(r.tokens);
  r.semantic = semantic;
  r.height = height;
  for (int y = 0; y < semantic.height(); ++y) {
    for (int x = 0; x < semantic.width(); ++x) {
      if (!region(x, y)) continue;
      r.semantic(x, y) = decoded.semantic(x, y);
      r.height(x, y) = decoded.height(x, y);
    }
  }
  return r;
}

}  // namespace citygen::synth
