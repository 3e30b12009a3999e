#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "citygen/errors.hpp"
#include "citygen/rng.hpp"
#include "citygen/synth.hpp"

using namespace citygen;
using namespace citygen::synth;

namespace {

ProceduralSampler procedural() { return ProceduralSampler(default_tokenizer()); }

bool is_road_token(const TokenGrid& g, int x, int y) {
  return default_tokenizer()->exemplar(g.at(x, y)).cls == SemanticClass::kRoad;
}

// Records every grid it was handed and what it returned.
class SpySampler : public TokenSampler {
 public:
  explicit SpySampler(const TokenSampler& inner) : inner_(inner) {}
  TokenGrid sample(const TokenGrid& masked, std::uint64_t seed) const override {
    inputs.push_back(masked);
    outputs.push_back(inner_.sample(masked, seed));
    return outputs.back();
  }
  mutable std::vector<TokenGrid> inputs, outputs;

 private:
  const TokenSampler& inner_;
};

class ContextClobberingSampler : public TokenSampler {
 public:
  mutable int calls = 0;
  TokenGrid sample(const TokenGrid& masked, std::uint64_t) const override {
    return TokenGrid(masked.width, masked.height, static_cast<std::int32_t>(calls++ % 2));
  }
};

}  // namespace

TEST(PatchSpec, Defaults) {
  PatchSpec spec;
  EXPECT_EQ(spec.token_side(), 32);
  EXPECT_EQ(spec.stride_px(), 384);
  EXPECT_NO_THROW(spec.validate());
  PatchSpec bad;
  bad.patch_px = 500;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(PlacementOffsets, StrideArithmetic) {
  EXPECT_EQ(placement_offsets(512, {}), (std::vector<int>{0}));
  EXPECT_EQ(placement_offsets(896, {}), (std::vector<int>{0, 384}));
  EXPECT_EQ(placement_offsets(1280, {}), (std::vector<int>{0, 384, 768}));
  // Last window is pulled back to stay in bounds.
  EXPECT_EQ(placement_offsets(1024, {}), (std::vector<int>{0, 384, 512}));
  EXPECT_THROW(placement_offsets(496, {}), DomainError);
}

TEST(PlacementOffsets, CoverEveryPixelWithOverlap) {
  for (int extent = 512; extent <= 4096; extent += 16) {
    const auto offs = placement_offsets(extent, {});
    std::vector<int> cover(extent, 0);
    for (int o : offs) {
      ASSERT_EQ(o % 16, 0);
      for (int x = o; x < o + 512; ++x) ++cover[x];
    }
    for (int c : cover) ASSERT_GE(c, 1);
    for (std::size_t i = 1; i < offs.size(); ++i) {
      ASSERT_GT(offs[i], offs[i - 1]);
      ASSERT_LE(offs[i] - offs[i - 1], 384);
    }
  }
}

TEST(ExemplarTokenizer, Vocabulary) {
  const auto& tok = *default_tokenizer();
  EXPECT_EQ(tok.vocabulary_size(), 512);
  EXPECT_EQ(tok.block_size(), 16);
  EXPECT_EQ(tok.exemplar(tok.token_for(SemanticClass::kRoad, 0)).height, 4);
  EXPECT_EQ(tok.exemplar(tok.token_for(SemanticClass::kGreenLand, 3)).height, 8);
  EXPECT_EQ(tok.exemplar(tok.token_for(SemanticClass::kBuilding, 37.4)).height, 37);
  EXPECT_EQ(tok.exemplar(tok.token_for(SemanticClass::kBuilding, 10000)).height, 499);
}

TEST(ExemplarTokenizer, RoundTripOnExemplarTiles) {
  const auto& tok = *default_tokenizer();
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    TokenGrid g(32, 32);
    for (auto& t : g.cells) t = static_cast<std::int32_t>(rng.below(512));
    const auto patch = tok.decode(g);
    ASSERT_EQ(patch.semantic.width(), 512);
    EXPECT_EQ(tok.encode(patch), g);
    const auto again = tok.decode(tok.encode(patch));
    EXPECT_EQ(again.semantic, patch.semantic);
    EXPECT_EQ(again.height, patch.height);
  }
}

TEST(ExemplarTokenizer, MajorityClassAndMeanHeight) {
  const auto& tok = *default_tokenizer();
  LayoutPatch p{geo::SemanticMap(16, 16, 2), geo::HeightField(16, 16, 30)};
  for (int x = 0; x < 16; ++x)
    for (int y = 0; y < 3; ++y) {
      p.semantic(x, y) = 1;
      p.height(x, y) = 4;
    }
  p.height(15, 15) = 46;  // building mean = (207*30 + 46) / 208
  const auto g = tok.encode(p);
  const auto& e = tok.exemplar(g.at(0, 0));
  EXPECT_EQ(e.cls, SemanticClass::kBuilding);
  EXPECT_EQ(e.height, 30);
  EXPECT_THROW(tok.encode({geo::SemanticMap(20, 16), geo::HeightField(20, 16)}), ValidationError);
}

TEST(Codebook, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "citygen_codebook.bin";
  const auto cb = default_tokenizer()->codebook(64);
  save_codebook(path, cb);
  EXPECT_EQ(std::filesystem::file_size(path), 8u + 512u * 64u * 4u);
  const auto back = load_codebook(path);
  EXPECT_EQ(back.K, 512);
  EXPECT_EQ(back.D, 64);
  EXPECT_EQ(back.entries, cb.entries);

  std::ifstream in(path, std::ios::binary);
  unsigned char head[8];
  in.read(reinterpret_cast<char*>(head), 8);
  EXPECT_EQ(head[0] | head[1] << 8, 512);  // little-endian K
  EXPECT_EQ(head[4], 64);

  std::filesystem::resize_file(path, 100);
  EXPECT_THROW(load_codebook(path), IoError);
  std::filesystem::remove(path);

  Codebook bad;
  bad.K = 2;
  bad.D = 2;
  bad.entries = {0.f, 1.f, NAN, 0.f};
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(ReplaySampler, FillsOnlyMasks) {
  TokenGrid src(2, 1);
  src.at(0, 0) = 7;
  src.at(1, 0) = 9;
  ReplaySampler s(src);
  TokenGrid g(4, 2);
  g.at(1, 1) = 100;
  const auto out = s.sample(g, 0);
  EXPECT_EQ(out.masked_count(), 0u);
  EXPECT_EQ(out.at(0, 0), 7);
  EXPECT_EQ(out.at(3, 0), 9);
  EXPECT_EQ(out.at(1, 1), 100);
  EXPECT_THROW(ReplaySampler(TokenGrid(1, 1)), ValidationError);
}

TEST(MakeSampler, ByName) {
  EXPECT_NE(make_sampler("procedural"), nullptr);
  EXPECT_NE(make_sampler("replay:3"), nullptr);
  EXPECT_THROW(make_sampler("replay:x"), ValidationError);
  EXPECT_THROW(make_sampler("replay:512"), ValidationError);
  EXPECT_THROW(make_sampler("transformer"), ValidationError);
}

TEST(Extrapolate, SinglePlacementIsDecodedSample) {
  const auto tok = default_tokenizer();
  const auto s = procedural();
  const auto r = extrapolate(512, 512, *tok, s, 11);
  ASSERT_EQ(r.placements.size(), 1u);
  const auto expect = tok->decode(s.sample(TokenGrid(32, 32), hash_values(11, 0)));
  EXPECT_EQ(r.semantic, expect.semantic);
  EXPECT_EQ(r.height, expect.height);
}

TEST(Extrapolate, TwoHorizontalPlacements) {
  const auto tok = default_tokenizer();
  ReplaySampler s(TokenGrid(1, 1, 20));
  const auto r = extrapolate(896, 512, *tok, s, 0);
  ASSERT_EQ(r.placements.size(), 2u);
  EXPECT_EQ(r.placements[0].x, 0);
  EXPECT_EQ(r.placements[1].x, 384);
  EXPECT_EQ(r.placements[1].context_tokens, 8u * 32u);  // columns 384..511
  EXPECT_EQ(r.placements[1].sampled_tokens, 24u * 32u);
  EXPECT_EQ(r.semantic.width(), 896);
}

TEST(Extrapolate, Errors) {
  const auto tok = default_tokenizer();
  const auto s = procedural();
  EXPECT_THROW(extrapolate(496, 512, *tok, s, 0), DomainError);
  EXPECT_THROW(extrapolate(520, 512, *tok, s, 0), DomainError);
  ContextClobberingSampler bad;
  EXPECT_THROW(extrapolate(896, 512, *tok, bad, 0), ValidationError);
}

TEST(Extrapolate, DeterministicPerSeed) {
  const auto tok = default_tokenizer();
  const auto s = procedural();
  const auto a = extrapolate(896, 896, *tok, s, 42);
  const auto b = extrapolate(896, 896, *tok, s, 42);
  const auto c = extrapolate(896, 896, *tok, s, 43);
  EXPECT_EQ(a.semantic, b.semantic);
  EXPECT_EQ(a.height, b.height);
  EXPECT_NE(a.tokens, c.tokens);
}

TEST(Extrapolate, ContextTokensNeverRewritten) {
  const auto tok = default_tokenizer();
  const auto inner = procedural();
  SpySampler spy(inner);
  const auto r = extrapolate(1280, 1280, *tok, spy, 3);
  ASSERT_EQ(spy.outputs.size(), 9u);
  for (std::size_t i = 0; i < r.placements.size(); ++i) {
    const auto& pl = r.placements[i];
    const auto final_window = r.tokens.crop(pl.x / 16, pl.y / 16, 32, 32);
    // Whatever the sampler produced for this placement survives to the end.
    EXPECT_EQ(final_window, spy.outputs[i]);
    for (std::size_t c = 0; c < spy.inputs[i].cells.size(); ++c)
      if (spy.inputs[i].cells[c] != kMaskToken) ASSERT_EQ(spy.outputs[i].cells[c], spy.inputs[i].cells[c]);
  }
}

TEST(ProceduralSampler, OutputIsCompleteAndValid) {
  const auto s = procedural();
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    TokenGrid g(32, 32);
    for (auto& t : g.cells)
      if (rng.uniform() < 0.3) t = static_cast<std::int32_t>(rng.below(512));
    const auto out = s.sample(g, trial);
    ASSERT_EQ(out.masked_count(), 0u);
    for (std::size_t i = 0; i < g.cells.size(); ++i) {
      ASSERT_GE(out.cells[i], 0);
      ASSERT_LT(out.cells[i], 512);
      if (g.cells[i] != kMaskToken) ASSERT_EQ(out.cells[i], g.cells[i]);
    }
    EXPECT_EQ(s.sample(g, trial), out);
  }
}

TEST(ProceduralSampler, ProducesRoadsAndBuildings) {
  const auto s = procedural();
  const auto out = s.sample(TokenGrid(32, 32), 1);
  int roads = 0, buildings = 0;
  for (auto t : out.cells) {
    const auto c = default_tokenizer()->exemplar(t).cls;
    roads += c == SemanticClass::kRoad;
    buildings += c == SemanticClass::kBuilding;
  }
  EXPECT_GT(roads, 32);
  EXPECT_GT(buildings, 0);
}

TEST(ProceduralSampler, RoadsContinueAcrossSeams) {
  const auto tok = default_tokenizer();
  const auto s = procedural();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = extrapolate(1280, 1280, *tok, s, seed);
    const auto offs = placement_offsets(1280, {});
    for (std::size_t i = 1; i < offs.size(); ++i) {
      const int seam = (offs[i - 1] + 512) / 16;
      for (int t = 0; t < r.tokens.height; ++t) {
        if (is_road_token(r.tokens, seam - 2, t) && is_road_token(r.tokens, seam - 1, t))
          ASSERT_TRUE(is_road_token(r.tokens, seam, t)) << "seed " << seed << " column seam " << seam;
        if (is_road_token(r.tokens, t, seam - 2) && is_road_token(r.tokens, t, seam - 1))
          ASSERT_TRUE(is_road_token(r.tokens, t, seam)) << "seed " << seed << " row seam " << seam;
      }
    }
  }
}

TEST(Inpaint, EmptyRegionRejected) {
  const auto tok = default_tokenizer();
  const auto s = procedural();
  const auto base = extrapolate(512, 512, *tok, s, 1);
  EXPECT_THROW(inpaint(base.semantic, base.height, Raster<std::uint8_t>(512, 512), *tok, s, 2), ValidationError);
  EXPECT_THROW(inpaint(base.semantic, base.height, Raster<std::uint8_t>(256, 512, 1), *tok, s, 2),
               ValidationError);
}

TEST(Inpaint, FullRegionEqualsExtrapolate) {
  const auto tok = default_tokenizer();
  const auto s = procedural();
  const auto base = extrapolate(896, 512, *tok, s, 1);
  const auto fresh = extrapolate(896, 512, *tok, s, 9);
  const auto r = inpaint(base.semantic, base.height, Raster<std::uint8_t>(896, 512, 1), *tok, s, 9);
  EXPECT_EQ(r.semantic, fresh.semantic);
  EXPECT_EQ(r.height, fresh.height);
}

TEST(Inpaint, SingleBlockTouchesOnlyRegion) {
  const auto tok = default_tokenizer();
  ReplaySampler s(TokenGrid(1, 1, 3));  // construction
  const auto base = extrapolate(512, 512, *tok, ReplaySampler(TokenGrid(1, 1, 1)), 0);
  Raster<std::uint8_t> region(512, 512);
  for (int y = 32; y < 48; ++y)
    for (int x = 64; x < 80; ++x) region(x, y) = 1;
  const auto r = inpaint(base.semantic, base.height, region, *tok, s, 0);
  EXPECT_EQ(r.tokens.at(4, 2), 3);
  int changed = 0;
  for (int y = 0; y < 512; ++y)
    for (int x = 0; x < 512; ++x) {
      if (!region(x, y)) {
        ASSERT_EQ(r.semantic(x, y), base.semantic(x, y));
      } else {
        changed += r.semantic(x, y) != base.semantic(x, y);
      }
    }
  EXPECT_EQ(changed, 256);
}

TEST(Inpaint, LocalityOnRandomRegions) {
  const auto tok = default_tokenizer();
  const auto s = procedural();
  const auto base = extrapolate(896, 896, *tok, s, 77);
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    Raster<std::uint8_t> region(896, 896);
    const int x0 = rng.range(0, 800), y0 = rng.range(0, 800);
    const int w = rng.range(1, 95), h = rng.range(1, 95);
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) region(x, y) = 1;
    const auto r = inpaint(base.semantic, base.height, region, *tok, s, trial);
    const auto dilated = dilate_to_blocks(region, 16);
    for (int y = 0; y < 896; ++y)
      for (int x = 0; x < 896; ++x)
        if (!dilated(x, y)) {
          ASSERT_EQ(r.semantic(x, y), base.semantic(x, y));
          ASSERT_EQ(r.height(x, y), base.height(x, y));
        }
  }
}

TEST(DilateToBlocks, RoundsOutward) {
  Raster<std::uint8_t> region(64, 32);
  region(17, 3) = 1;
  const auto d = dilate_to_blocks(region, 16);
  int count = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) count += d(x, y);
  EXPECT_EQ(count, 256);
  EXPECT_EQ(d(16, 0), 1);
  EXPECT_EQ(d(31, 15), 1);
  EXPECT_EQ(d(32, 0), 0);
}

TEST(Metrics, HeightL1) {
  geo::HeightField a(4, 4, 5), b(4, 4, 8);
  EXPECT_EQ(height_l1(a, a), 0.0);
  EXPECT_DOUBLE_EQ(height_l1(a, b), 3.0);
  Rng rng(2);
  for (auto& v : a.storage()) v = static_cast<std::uint16_t>(rng.below(100));
  for (auto& v : b.storage()) v = static_cast<std::uint16_t>(rng.below(100));
  double sum = 0;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) sum += std::fabs(double(a(x, y)) - double(b(x, y)));
  EXPECT_NEAR(height_l1(a, b), sum / 16.0, 1e-12);
  EXPECT_THROW(height_l1(a, geo::HeightField(3, 4)), ValidationError);
}

TEST(Metrics, CrossEntropy) {
  geo::SemanticMap gt(3, 3);
  Rng rng(4);
  for (auto& v : gt.storage()) v = static_cast<std::uint8_t>(rng.below(7));
  LogitMap onehot(3, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      onehot(x, y).fill(0.0);
      onehot(x, y)[gt(x, y)] = 50.0;
    }
  EXPECT_NEAR(semantic_cross_entropy(onehot, gt), 0.0, 1e-12);
  LogitMap uniform(3, 3);
  for (auto& l : uniform.storage()) l.fill(0.25);
  EXPECT_NEAR(semantic_cross_entropy(uniform, gt), std::log(7.0), 1e-12);
  EXPECT_NEAR(std::log(7.0), 1.9459, 1e-4);

  LogitMap random(3, 3);
  for (auto& l : random.storage())
    for (auto& v : l) v = rng.uniform(-5, 5);
  double expect = 0;
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      double z = 0;
      for (double v : random(x, y)) z += std::exp(v);
      expect += -std::log(std::exp(random(x, y)[gt(x, y)]) / z);
    }
  EXPECT_NEAR(semantic_cross_entropy(random, gt), expect / 9.0, 1e-12);
  EXPECT_THROW(semantic_cross_entropy(random, geo::SemanticMap(2, 3)), ValidationError);
}

TEST(Metrics, SmoothnessEdgeAware) {
  geo::HeightField flat(8, 8, 12);
  geo::SemanticMap guide(8, 8, 2);
  EXPECT_EQ(height_smoothness(flat, guide), 0.0);

  // Step of 10 between columns 3 and 4.
  geo::HeightField step(8, 8, 0);
  for (int y = 0; y < 8; ++y)
    for (int x = 4; x < 8; ++x) step(x, y) = 10;
  // Inside one class: 8 of 56 x-differences carry |dh| = 10.
  EXPECT_NEAR(height_smoothness(step, guide), 10.0 * 8.0 / 56.0, 1e-12);
  // Same step on a class boundary is down-weighted by exp(-10).
  geo::SemanticMap split = guide;
  for (int y = 0; y < 8; ++y)
    for (int x = 4; x < 8; ++x) split(x, y) = 1;
  EXPECT_NEAR(height_smoothness(step, split), 10.0 * std::exp(-10.0) * 8.0 / 56.0, 1e-12);
  EXPECT_LT(height_smoothness(step, split), 1e-3);
  EXPECT_THROW(height_smoothness(step, geo::SemanticMap(8, 7)), ValidationError);
}

TEST(Metrics, CombinedUsesConfiguredWeights) {
  geo::HeightField a(4, 4, 0), b(4, 4, 1);
  geo::SemanticMap s(4, 4, 2);
  LogitMap l(4, 4);
  for (auto& v : l.storage()) v.fill(0.0);
  const auto m = patch_metrics(a, b, l, s);
  EXPECT_DOUBLE_EQ(m.l1, 1.0);
  EXPECT_DOUBLE_EQ(m.smoothness, 0.0);
  EXPECT_NEAR(m.combined, 10.0 * 1.0 + std::log(7.0), 1e-12);
}
