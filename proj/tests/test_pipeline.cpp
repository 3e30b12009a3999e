#include <gtest/gtest.h>

#include <set>

#include "citygen/dataset.hpp"
#include "citygen/pipeline.hpp"
#include "citygen/rng.hpp"
#include "citygen/synth.hpp"

using namespace citygen;
using namespace citygen::pipeline;

namespace {

layout::CityLayout small_city(std::uint64_t seed) {
  const auto tok = synth::default_tokenizer();
  const synth::ProceduralSampler sampler(tok);
  const auto r = synth::extrapolate(512, 512, *tok, sampler, seed);
  return layout::CityLayout(r.semantic, r.height);
}

SceneConfig small_config(std::uint64_t seed, int threads) {
  SceneConfig c;
  c.seed = seed;
  c.grid = param::HashGridConfig{.levels = 4, .table_size = 1 << 12, .channels = 2, .max_resolution = 128};
  c.settings.threads = threads;
  return c;
}

render::Trajectory orbit(int w, int h) {
  dataset::OrbitSpec o;
  o.center_x = o.center_y = 256;
  o.frames = 4;
  o.intrinsics = render::CameraIntrinsics::from_fov(w, h, 45);
  return dataset::orbit_trajectory(o, 512, 512);
}

}  // namespace

TEST(Scene, ScreenRectCoversInstancePixels) {
  const SceneRenderer scene(small_city(3), small_config(3, 1));
  const auto t = orbit(160, 90);
  for (std::size_t f = 0; f < t.size(); ++f) {
    const auto ann = dataset::project_annotations(scene.layout(), scene.instances(), t.intrinsics[f], t.poses[f]);
    for (const auto& b : scene.instances()) {
      const auto rect = scene.screen_rect(b, t.intrinsics[f], t.poses[f]);
      for (int y = 0; y < 90; ++y)
        for (int x = 0; x < 160; ++x) {
          if (ann.instance(x, y) != b.id) continue;
          ASSERT_TRUE(rect);
          ASSERT_TRUE(x >= rect->x0 && x < rect->x0 + rect->width && y >= rect->y0 && y < rect->y0 + rect->height);
        }
    }
  }
}

TEST(Scene, CompositeIsPartitionAndInstancesValid) {
  const SceneRenderer scene(small_city(5), small_config(5, 1));
  const auto t = orbit(96, 54);
  const auto out = scene.render(t.intrinsics[1], t.poses[1]);
  std::set<std::uint32_t> ids{0};
  for (const auto& b : scene.instances()) ids.insert(b.id);
  std::size_t from_buildings = 0;
  for (int y = 0; y < 54; ++y)
    for (int x = 0; x < 96; ++x) {
      int total = out.masks.background(x, y);
      for (const auto& m : out.masks.buildings) total += m(x, y);
      ASSERT_EQ(total, 1);
      ASSERT_TRUE(ids.count(out.instance(x, y)));
      if (out.winner(x, y) != 0) {
        ++from_buildings;
        const auto c = static_cast<SemanticClass>(out.semantic(x, y));
        ASSERT_TRUE(c == SemanticClass::kFacade || c == SemanticClass::kRoof);
      }
    }
  EXPECT_GT(from_buildings, 100u);
}

TEST(Scene, DeterministicAcrossThreadCounts) {
  const auto city = small_city(9);
  const auto t = orbit(80, 45);
  const SceneRenderer one(city, small_config(9, 1));
  const SceneRenderer four(city, small_config(9, 4));
  const auto a = one.render(t.intrinsics[2], t.poses[2]);
  const auto b = four.render(t.intrinsics[2], t.poses[2]);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.depth, b.depth);
  EXPECT_EQ(a.winner, b.winner);
}

TEST(Scene, StyleOverrideChangesOnlyThatBuilding) {
  SceneRenderer scene(small_city(4), small_config(4, 1));
  const auto t = orbit(96, 54);
  const auto a = scene.render(t.intrinsics[0], t.poses[0]);
  std::uint32_t id = 0;
  for (auto v : a.instance.storage()) id = std::max(id, v);
  ASSERT_NE(id, 0u);
  scene.set_style(id, param::StyleCode::random(999));
  const auto b = scene.render(t.intrinsics[0], t.poses[0]);
  bool changed = false;
  for (std::size_t i = 0; i < a.image.size(); ++i) {
    if (a.instance.storage()[i] != id) {
      ASSERT_EQ(a.image.storage()[i], b.image.storage()[i]);
    } else {
      changed |= !(a.image.storage()[i] == b.image.storage()[i]);
    }
  }
  EXPECT_TRUE(changed);
}
